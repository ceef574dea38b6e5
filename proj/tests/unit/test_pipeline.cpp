#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "xforge/mock_backends.hpp"
#include "xforge/pipeline.hpp"
#include "xforge/synthetic.hpp"

using namespace xforge;
using namespace xforge::pipeline;

namespace {

PipelineConfig small_config(const testing::TempDir& dir, const std::string& work = "work") {
    synthetic::CorpusOptions corpus;
    corpus.documents = 300;
    corpus.out_of_range = 10;
    corpus.duplicates = 5;
    const auto paths = synthetic::write_fixture(dir / "data", LanguageCode("sw"), corpus, 40, 40, 3);
    PipelineConfig c;
    c.corpus = paths.corpus;
    c.native_seed = paths.native;
    c.translated_seed = paths.translated;
    c.work_dir = dir / work;
    c.seed_tuning_size = 50;
    c.kmeans_k = 5;
    c.final_total = 40;
    c.rng_seed = 11;
    use_mock_roles(c);
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("pipeline config") {

TEST_CASE("json round trip and unknown keys") {
    PipelineConfig c;
    c.lang = LanguageCode("ta");
    c.final_total = 77;
    c.roles.follower = "f-{k}";
    c.sampling.max_new = 64;
    const json j = c;
    const auto back = j.get<PipelineConfig>();
    CHECK(back.lang == LanguageCode("ta"));
    CHECK(back.final_total == 77);
    CHECK(back.roles.follower == "f-{k}");
    CHECK(back.sampling.max_new == 64);
    CHECK(json(back) == j);

    json bad = j;
    bad["kmeans_kk"] = 3;
    CHECK_THROWS_AS(bad.get<PipelineConfig>(), backends::ConfigurationError);
}

TEST_CASE("defaults") {
    const PipelineConfig c;
    CHECK(c.len_min == 64);
    CHECK(c.len_max == 2048);
    CHECK(c.seed_tuning_size == 2500);
    CHECK(c.iterations == 3);
    CHECK(c.kmeans_k == 1000);
    CHECK(c.final_total == 32000);
    CHECK(c.sampling.top_p == 0.9);
    CHECK(c.sampling.temperature == 0.7);
    CHECK(c.sampling.max_new == 128);
}

TEST_CASE("load_config resolves relative paths against the file") {
    testing::TempDir dir;
    std::filesystem::create_directories(dir / "cfg");
    std::ofstream(dir / "cfg/run.json") << R"({"lang":"hi","corpus":"data/c.jsonl","work_dir":"out"})";
    const auto c = load_config(dir / "cfg/run.json");
    CHECK(c.lang == LanguageCode("hi"));
    CHECK(c.corpus == dir / "cfg/data/c.jsonl");
    CHECK(c.work_dir == dir / "cfg/out");
}

TEST_CASE("role names expand the iteration") {
    CHECK(role_for_iteration("evaluator-it{k}", 2) == "evaluator-it2");
    CHECK(role_for_iteration("plain", 3) == "plain");
}

}  // TEST_SUITE

TEST_SUITE("pipeline run") {

TEST_CASE("mock run completes every stage and reruns reuse them") {
    testing::TempDir dir;
    const auto cfg = small_config(dir);
    auto reg = mock::make_mock_registry({.embedding_dim = 32});
    const auto m = run_all(cfg, reg);
    REQUIRE(m.status == StageStatus::completed);
    REQUIRE(m.stages.size() == kStages.size());
    for (const auto& s : m.stages) {
        CHECK(s.status == StageStatus::completed);
        CHECK_FALSE(s.reused);
        CHECK(s.digest.size() == 64);
    }
    CHECK(m.stage("seed")->counts["tuning"] == 50);
    CHECK(m.stage("seed")->counts["rating_source"] == 30);
    CHECK(m.stage("ingest")->counts["emitted"] == 300);
    CHECK(m.stage("ingest")->counts["duplicates"] == 5);
    CHECK(m.stage("ingest")->counts["too_short"].get<int>() + m.stage("ingest")->counts["too_long"].get<int>() == 10);
    CHECK(m.stage("diversify")->counts["selected"] == 40);
    CHECK(load_samples(cfg.work_dir / "final.jsonl").size() == 40);
    CHECK(std::filesystem::exists(cfg.work_dir / "manifest.json"));
    CHECK(std::filesystem::exists(cfg.work_dir / "stats.txt"));

    const auto again = run_all(cfg, reg);
    CHECK(again.digests() == m.digests());
    for (const auto& s : again.stages) CHECK(s.reused);

    // A fresh directory with a fresh registry reproduces every digest.
    auto cfg2 = cfg;
    cfg2.work_dir = dir / "other";
    auto reg2 = mock::make_mock_registry({.embedding_dim = 32});
    CHECK(run_all(cfg2, reg2).digests() == m.digests());
    CHECK(slurp(cfg.work_dir / "final.jsonl") == slurp(cfg2.work_dir / "final.jsonl"));
}

TEST_CASE("tampered outputs rerun from that stage and config changes rerun all") {
    testing::TempDir dir;
    auto cfg = small_config(dir);
    auto reg = mock::make_mock_registry({.embedding_dim = 32});
    const auto first = run_all(cfg, reg);
    REQUIRE(first.status == StageStatus::completed);

    // Tampering with an output invalidates that stage and everything after.
    std::ofstream(cfg.work_dir / "candidates.jsonl", std::ios::app) << "\n";
    const auto m = run_all(cfg, reg);
    CHECK(m.stage("gen_export")->reused);
    CHECK_FALSE(m.stage("candidates")->reused);
    CHECK_FALSE(m.stage("stats")->reused);
    CHECK(m.digests() == first.digests());

    cfg.final_total = 30;
    const auto changed = run_all(cfg, reg);
    CHECK_FALSE(changed.stage("ingest")->reused);
    CHECK(changed.stage("refinement")->digest == first.stage("refinement")->digest);
    CHECK(changed.stage("diversify")->digest != first.stage("diversify")->digest);
}

TEST_CASE("a missing evaluator pauses and a later run resumes to the same result") {
    testing::TempDir dir;
    auto cfg = small_config(dir, "paused");
    cfg.roles.evaluator = "eval-it{k}";
    auto evaluator = [](const std::string& name) {
        return testing::client(name, std::make_shared<mock::HashEvaluatorModel>());
    };

    auto partial = mock::make_mock_registry({.embedding_dim = 32});
    partial.add_chat(evaluator("eval-it1"));
    const auto paused = run_all(cfg, partial);
    CHECK(paused.status == StageStatus::paused);
    CHECK(paused.paused_at_iteration == 2);
    CHECK(paused.stage("refinement")->status == StageStatus::paused);
    CHECK(paused.stage("diversify")->status == StageStatus::pending);

    auto full = mock::make_mock_registry({.embedding_dim = 32});
    for (int k = 1; k <= 3; ++k) full.add_chat(evaluator("eval-it" + std::to_string(k)));
    const auto resumed = run_all(cfg, full);
    REQUIRE(resumed.status == StageStatus::completed);
    CHECK(resumed.stage("candidates")->reused);
    CHECK_FALSE(resumed.paused_at_iteration);

    auto straight_cfg = cfg;
    straight_cfg.work_dir = dir / "straight";
    auto full2 = mock::make_mock_registry({.embedding_dim = 32});
    for (int k = 1; k <= 3; ++k) full2.add_chat(evaluator("eval-it" + std::to_string(k)));
    const auto straight = run_all(straight_cfg, full2);
    CHECK(straight.digests() == resumed.digests());
}

TEST_CASE("a stage error yields a failed manifest with the message") {
    testing::TempDir dir;
    auto cfg = small_config(dir);
    cfg.final_total = 100000;
    auto reg = mock::make_mock_registry({.embedding_dim = 32});
    const auto m = run_all(cfg, reg);
    CHECK(m.status == StageStatus::failed);
    CHECK(m.stage("diversify")->status == StageStatus::failed);
    CHECK(m.stage("diversify")->error.find("final_total") != std::string::npos);
    CHECK(m.stage("stats")->status == StageStatus::pending);

    const auto j = load_json(cfg.work_dir / "manifest.json");
    CHECK(j["status"] == "failed");
    CHECK(j["stages"][0].contains("error") == false);
    CHECK(j["stages"][5]["error"].is_string());

    cfg.corpus = dir / "absent.jsonl";
    cfg.work_dir = dir / "w2";
    CHECK(run_all(cfg, reg).stage("ingest")->status == StageStatus::failed);
}

}  // TEST_SUITE
