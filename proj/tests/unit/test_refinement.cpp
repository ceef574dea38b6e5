#include <doctest.h>

#include <map>
#include <set>

#include "test_support.hpp"
#include "xforge/mock_backends.hpp"
#include "xforge/refinement.hpp"
#include "xforge/text.hpp"

using namespace xforge;
using namespace xforge::refinement;

namespace {

const LanguageCode kSw{"sw"};

std::vector<std::string> pieces(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& seg : segment(s)) out.emplace_back(s.substr(seg.begin, seg.end - seg.begin));
    return out;
}

bool ends_space(const std::string& s) { return !s.empty() && text::trim(s.substr(s.size() - 1)).empty(); }

/// Every text a single contiguous deletion of 1..max segments could produce.
std::set<std::string> deletion_oracle(std::string_view s) {
    const auto segs = segment(s);
    const std::size_t n = segs.size();
    const std::size_t max_remove = std::min<std::size_t>(n - 1, (2 * n + 4) / 5);
    std::set<std::string> out;
    for (std::size_t count = 1; count <= max_remove; ++count)
        for (std::size_t first = 0; first + count <= n; ++first) {
            std::string r(s.substr(0, segs[first].begin));
            r.append(s.substr(segs[first + count - 1].end));
            if (!ends_space(std::string(s)))
                while (ends_space(r)) r.pop_back();
            out.insert(r);
        }
    return out;
}

std::vector<XSample> varied_source(std::size_t n, std::uint64_t seed) {
    std::vector<XSample> out;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::string body;
        switch (rng.index(5)) {
            case 0: body = synthetic::pseudo_text(rng.next(), 20 + rng.index(400)); break;
            case 1: body = "Jibu moja"; break;  // single short segment
            case 2: body = std::string(40 + rng.index(60), 'x'); break;  // no terminators
            case 3: body = "यह पहला वाक्य है। यह दूसरा है।"; break;
            default: body = synthetic::pseudo_text(rng.next(), 900); break;
        }
        out.push_back(make_seed_sample("s" + std::to_string(i), "Instruction " + std::to_string(i), body, kSw,
                                       Origin::seed_native));
    }
    return out;
}

refinement::IterationModels hash_models(std::shared_ptr<backends::ChatClient> eval) {
    return {[eval](int) { return eval; }, [](int) { return std::shared_ptr<backends::ChatClient>(); }};
}

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("splits on sentence terminators and keeps trailing space") {
    CHECK(pieces("One. Two! Three?") == std::vector<std::string>{"One. ", "Two! ", "Three?"});
    CHECK(pieces("Wait... what?! Fine") == std::vector<std::string>{"Wait... ", "what?! ", "Fine"});
}

TEST_CASE("periods inside numbers and urls do not split") {
    CHECK(pieces("Pi is 3.14 today. See example.com now.") ==
          std::vector<std::string>{"Pi is 3.14 today. ", "See example.com now."});
}

TEST_CASE("script-specific stops") {
    CHECK(pieces("यह एक है। दूसरा है।").size() == 2);
    CHECK(pieces("یہ ہے۔ وہ ہے؟ ہاں").size() == 3);
    CHECK(pieces("第一句。第二句！第三句？").size() == 3);
    CHECK(pieces("line one\nline two\n") == std::vector<std::string>{"line one\n", "line two\n"});
}

TEST_CASE("leading and blank pieces fold into neighbours") {
    CHECK(pieces("  A. B.") == std::vector<std::string>{"  A. ", "B."});
    CHECK(pieces("\n\nA.\n\n\nB.") == std::vector<std::string>{"\n\nA.\n\n\n", "B."});
}

TEST_CASE("fixed-width fallback") {
    const std::string flat(70, 'a');
    const auto segs = segment(flat);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].end - segs[0].begin == 32);
    CHECK(segs[2].end - segs[2].begin == 6);
    CHECK(segment("Hello there").size() == 1);
    CHECK(segment(flat, 0).size() == 1);
    // Width counts scalars: 40 Thai characters are 120 bytes.
    std::string thai;
    for (int i = 0; i < 40; ++i) thai += "ก";
    const auto t = segment(thai);
    REQUIRE(t.size() == 2);
    CHECK(t[0].end == 96);
}

TEST_CASE("segments tile the text") {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto body = synthetic::pseudo_text(s, 10 + s * 7);
        const auto segs = segment(body);
        REQUIRE_FALSE(segs.empty());
        CHECK(segs.front().begin == 0);
        CHECK(segs.back().end == body.size());
        for (std::size_t i = 1; i < segs.size(); ++i) CHECK(segs[i].begin == segs[i - 1].end);
        for (const auto& seg : segs) CHECK_FALSE(text::trim(body.substr(seg.begin, seg.end - seg.begin)).empty());
    }
}

}  // TEST_SUITE

TEST_SUITE("corruption") {

TEST_CASE("deletion removes one contiguous run of at most ceil(0.4 n) segments") {
    for (std::uint64_t s = 0; s < 300; ++s) {
        const auto body = synthetic::pseudo_text(s, 60 + (s % 50) * 20);
        if (segment(body).size() < 2) continue;
        const auto out = corrupt_delete(body, s);
        CHECK(out != body);
        CHECK_FALSE(text::trim(out).empty());
        CHECK(deletion_oracle(body).count(out) == 1);
    }
}

TEST_CASE("deletion cap examples") {
    // n=2 allows removing one; n=5 allows two; n=6 allows three (ceil 2.4).
    const std::string two = "A. B.";
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 50; ++s) seen.insert(corrupt_delete(two, s));
    CHECK(seen == std::set<std::string>{"A.", "B."});

    const std::string six = "A. B. C. D. E. F.";
    std::size_t max_removed = 0;
    for (std::uint64_t s = 0; s < 400; ++s) {
        const auto out = corrupt_delete(six, s);
        max_removed = std::max(max_removed, 6 - pieces(out).size());
    }
    CHECK(max_removed == 3);
}

TEST_CASE("single segment responses cannot be deleted from") {
    CHECK_THROWS_AS(corrupt_delete("Only one sentence", 1), NotCorruptible);
    CHECK_THROWS_AS(corrupt_delete("", 1), NotCorruptible);
}

TEST_CASE("duplication repeats one segment in place") {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto body = synthetic::pseudo_text(s, 30 + s * 5);
        const auto before = pieces(body);
        const auto out = corrupt_duplicate(body, s);
        CHECK(out != body);
        CHECK(out.size() > body.size());
        // Some segment i appears twice in a row.
        bool found = false;
        for (std::size_t i = 0; i < before.size() && !found; ++i) {
            std::string expect;
            for (std::size_t j = 0; j < before.size(); ++j) {
                expect += before[j];
                if (j == i) {
                    if (j + 1 == before.size() && !ends_space(before[j])) expect += ' ';
                    expect += before[j];
                }
            }
            found = expect == out;
        }
        CHECK(found);
    }
    CHECK(corrupt_duplicate("Hi", 0) == "Hi Hi");
    CHECK_THROWS(corrupt_duplicate("", 0));
}

TEST_CASE("corruption is deterministic per seed") {
    const auto body = synthetic::pseudo_text(99, 800);
    CHECK(corrupt_delete(body, 5) == corrupt_delete(body, 5));
    CHECK(corrupt_duplicate(body, 5) == corrupt_duplicate(body, 5));
}

}  // TEST_SUITE

TEST_SUITE("rating synthesis") {

TEST_CASE("three triples per sample in score order 2, 0, 1") {
    const auto src = varied_source(30, 1);
    const auto triples = synth_rating_set(src, nullptr, 7);
    REQUIRE(triples.size() == 90);
    for (std::size_t j = 0; j < src.size(); ++j) {
        const auto& v = triples[3 * j];
        const auto& m = triples[3 * j + 1];
        const auto& f = triples[3 * j + 2];
        CHECK(v.score == 2);
        CHECK(v.provenance == Provenance::vanilla);
        CHECK(v.response == src[j].output);
        CHECK(m.score == 0);
        CHECK(m.provenance == Provenance::mismatched);
        CHECK(m.response != src[j].output);
        CHECK(f.score == 1);
        CHECK((f.provenance == Provenance::deleted || f.provenance == Provenance::duplicated));
        CHECK(f.response != src[j].output);
        CHECK_FALSE(text::trim(f.response).empty());
        for (const auto* t : {&v, &m, &f}) {
            CHECK(t->instruction_en == src[j].instruction_en);
            CHECK(t->source_sample_id == src[j].id);
        }
    }
}

TEST_CASE("mismatched responses come from another sample") {
    const auto src = varied_source(25, 2);
    std::set<std::string> outputs;
    for (const auto& s : src) outputs.insert(s.output);
    const auto triples = synth_rating_set(src, nullptr, 3);
    for (std::size_t j = 0; j < src.size(); ++j) CHECK(outputs.count(triples[3 * j + 1].response) == 1);
}

TEST_CASE("duplicate outputs still find a differing partner") {
    auto src = testing::seed_samples(6, kSw, 1, 100);
    for (std::size_t i = 1; i < 5; ++i) src[i].output = src[0].output;
    const auto triples = synth_rating_set(src, nullptr, 4);
    for (std::size_t j = 0; j < src.size(); ++j) CHECK(triples[3 * j + 1].response != src[j].output);

    for (auto& s : src) s.output = src[0].output;
    CHECK_THROWS_AS(synth_rating_set(src, nullptr, 4), std::invalid_argument);
    CHECK_THROWS_AS(synth_rating_set({src[0]}, nullptr, 4), std::invalid_argument);
}

TEST_CASE("deterministic under a fixed seed") {
    const auto src = varied_source(40, 3);
    const auto a = synth_rating_set(src, nullptr, 11);
    const auto b = synth_rating_set(src, nullptr, 11);
    const auto c = synth_rating_set(src, nullptr, 12);
    REQUIRE(a.size() == b.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].response == b[i].response);
        CHECK(a[i].provenance == b[i].provenance);
        any_diff = any_diff || a[i].response != c[i].response;
    }
    CHECK(any_diff);
}

TEST_CASE("flaw mixture proportions") {
    const auto src = testing::seed_samples(3000, kSw, 5, 300);
    auto follower = testing::client("f", std::make_shared<mock::FollowerModel>());
    const auto triples = synth_rating_set(src, follower.get(), 1);
    std::map<Provenance, std::size_t> counts;
    for (std::size_t j = 0; j < src.size(); ++j) ++counts[triples[3 * j + 2].provenance];
    // 40/40/20 with a follower; 3000 draws keep each within a few points.
    CHECK(counts[Provenance::model_output] > 480);
    CHECK(counts[Provenance::model_output] < 720);
    CHECK(counts[Provenance::deleted] > 1080);
    CHECK(counts[Provenance::duplicated] > 1080);

    const auto no_follower = synth_rating_set(src, nullptr, 1);
    std::map<Provenance, std::size_t> c2;
    for (std::size_t j = 0; j < src.size(); ++j) ++c2[no_follower[3 * j + 2].provenance];
    CHECK(c2[Provenance::model_output] == 0);
    CHECK(c2[Provenance::deleted] > 1350);
    CHECK(c2[Provenance::duplicated] > 1350);
}

TEST_CASE("follower replies that match the vanilla response fall back to a structural flaw") {
    const auto src = testing::seed_samples(200, kSw, 8, 300);
    std::map<std::string, std::string> by_instruction;
    for (const auto& s : src) by_instruction[s.instruction_en] = s.output;
    auto parrot = testing::client("f", std::make_shared<mock::FunctionModel>([&](const backends::InferenceRequest& r) {
                                      return by_instruction.at(r.user_prompt);
                                  }));
    RatingSynthesisOptions opts;
    opts.mixture = FlawMixture{0, 0, 1};
    const auto triples = synth_rating_set(src, parrot.get(), 2, opts);
    for (std::size_t j = 0; j < src.size(); ++j) {
        CHECK(triples[3 * j + 2].provenance != Provenance::model_output);
        CHECK(triples[3 * j + 2].response != src[j].output);
    }
}

TEST_CASE("model output flaws use the follower reply") {
    const auto src = testing::seed_samples(20, kSw, 9, 300);
    auto follower = testing::client("f", std::make_shared<mock::FollowerModel>());
    RatingSynthesisOptions opts;
    opts.mixture = FlawMixture{0, 0, 1};
    const auto triples = synth_rating_set(src, follower.get(), 2, opts);
    for (std::size_t j = 0; j < src.size(); ++j) {
        CHECK(triples[3 * j + 2].provenance == Provenance::model_output);
        CHECK(triples[3 * j + 2].response == "[follower] " + src[j].instruction_en);
    }
}

TEST_CASE("triple json enforces score-provenance agreement") {
    RatingTriple t{"i", "r", 1, Provenance::deleted, "s1", kSw};
    json j = t;
    CHECK(j["provenance"] == "deleted");
    CHECK(j.get<RatingTriple>().score == 1);
    j["score"] = 2;
    CHECK_THROWS(j.get<RatingTriple>());
    CHECK(score_for(Provenance::duplicated) == 1);
    CHECK(score_for(Provenance::model_output) == 1);
}

TEST_CASE("evaluator training export") {
    const auto src = testing::seed_samples(4, kSw, 1, 100);
    const auto triples = synth_rating_set(src, nullptr, 1);
    const auto recs = export_evaluator_train(triples);
    REQUIRE(recs.size() == 12);
    CHECK(recs[0].id == src[0].id + "#2");
    CHECK(recs[1].id == src[0].id + "#0");
    CHECK(recs[2].assistant == "1");
    const auto req = evaluator_request(kSw, triples[0].instruction_en, triples[0].response);
    CHECK(recs[0].user == req.user_prompt);
    CHECK(req.sampling.temperature == 0.0);
    CHECK_THROWS(export_evaluator_train({}));
}

TEST_CASE("follower export picks the system prompt by origin") {
    std::vector<XSample> dx{make_seed_sample("a", "i", "o", kSw, Origin::seed_native),
                            make_mined_sample("b", "i", "o", kSw, 2, 1)};
    const auto recs = export_follower_train(dx);
    CHECK(recs[0].system.find("AI assistant") != std::string::npos);
    CHECK(recs[1].system.find("web") != std::string::npos);
    CHECK(recs[1].assistant == "o");
}

}  // TEST_SUITE

TEST_SUITE("scoring and selection") {

TEST_CASE("parse_rating accepts only a bare digit 0..2") {
    CHECK(parse_rating("2") == 2);
    CHECK(parse_rating(" 0\n") == 0);
    CHECK_FALSE(parse_rating("3"));
    CHECK_FALSE(parse_rating("2."));
    CHECK_FALSE(parse_rating("Score: 2"));
    CHECK_FALSE(parse_rating(""));
}

TEST_CASE("score_candidates rates every candidate and counts failures") {
    const auto docs = testing::documents(20, kSw, 3);
    corpus::DocumentIndex index(docs);
    std::vector<generation::Candidate> cands;
    for (const auto& d : docs) cands.push_back({d.id, kSw, "Write about " + d.id.substr(0, 4) + ".", {}, {}});
    int n = 0;
    std::mutex mu;
    auto eval = testing::client("e", std::make_shared<mock::FunctionModel>([&](const backends::InferenceRequest&) {
                                    std::lock_guard lock(mu);
                                    return ++n % 4 == 0 ? std::string("maybe") : std::string("2");
                                }));
    const auto r = score_candidates(cands, index, *eval, 1, 1);
    CHECK(r.candidates.size() == 20);
    CHECK(r.parse_failures == 5);
    CHECK(r.skipped == 0);
    std::size_t zeros = 0;
    for (const auto& c : r.candidates) zeros += c.rating_history.at(1) == 0;
    CHECK(zeros == 5);

    cands.push_back({"missing", kSw, "x", {}, {}});
    CHECK_THROWS_AS(score_candidates(cands, index, *eval, 1), std::invalid_argument);
}

TEST_CASE("exhausted evaluator calls drop the candidate") {
    const auto docs = testing::documents(3, kSw, 4);
    corpus::DocumentIndex index(docs);
    std::vector<generation::Candidate> cands;
    for (const auto& d : docs) cands.push_back({d.id, kSw, "Explain " + d.id, {}, {}});
    backends::ClientPolicy p;
    p.max_attempts = 1;
    auto eval = testing::client("e", std::make_shared<mock::FlakyModel>(1, std::make_shared<mock::HashEvaluatorModel>()), p);
    const auto r = score_candidates(cands, index, *eval, 1, 1);
    CHECK(r.skipped == 1);
    CHECK(r.candidates.size() == 2);
}

TEST_CASE("select_best promotes exactly the 2s and keeps the tuning seed") {
    const auto docs = testing::documents(10, kSw, 5);
    corpus::DocumentIndex index(docs);
    std::vector<generation::Candidate> cands;
    for (std::size_t i = 0; i < docs.size(); ++i)
        cands.push_back({docs[i].id, kSw, "Task " + std::to_string(i), {}, {{3, static_cast<int>(i % 3)}}});
    const auto tuning = testing::seed_samples(4, kSw, 1, 50);
    const auto st = select_best(cands, index, 3, 1000, tuning, 0);
    CHECK(st.k == 4);
    CHECK(st.mined == 3);
    CHECK(st.dx.size() == 7);
    CHECK(st.selected_counts.at(0) == 4);
    CHECK(st.selected_counts.at(1) == 3);
    CHECK(st.selected_counts.at(2) == 3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(st.dx[i].id == tuning[i].id);
    const auto& m = st.dx[4];
    CHECK(m.origin == Origin::mined);
    CHECK(m.rating == 2);
    CHECK(m.iteration_found == 3);
    CHECK(m.output == docs[2].text);
    CHECK(m.id == "sw-mined-" + docs[2].id);

    cands[0].rating_history.clear();
    CHECK_THROWS(select_best(cands, index, 3, 1000, tuning, 0));
}

TEST_CASE("select_best downsamples to the promotion cap deterministically") {
    const auto docs = testing::documents(50, kSw, 6);
    corpus::DocumentIndex index(docs);
    std::vector<generation::Candidate> cands;
    for (const auto& d : docs) cands.push_back({d.id, kSw, "T", {}, {{1, 2}}});
    const auto a = select_best(cands, index, 1, 20, {}, 9);
    const auto b = select_best(cands, index, 1, 20, {}, 9);
    CHECK(a.mined == 20);
    REQUIRE(a.dx.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(a.dx[i].id == b.dx[i].id);
    CHECK(a.selected_counts.at(2) == 50);
}

}  // TEST_SUITE

TEST_SUITE("refinement driver") {

struct Fixture {
    std::vector<corpus::Document> docs = testing::documents(120, kSw, 21);
    std::vector<generation::Candidate> cands;
    std::vector<XSample> tuning = testing::seed_samples(10, kSw, 1, 200);
    std::vector<XSample> rating;
    Fixture() {
        for (std::size_t i = 0; i < docs.size(); ++i)
            cands.push_back({docs[i].id, kSw, "Describe item " + std::to_string(i) + ".", {}, {}});
        auto r = testing::seed_samples(8, kSw, 2, 200);
        for (auto& s : r) s.id = "r-" + s.id;
        rating = r;
    }
};

TEST_CASE("runs all iterations and records history") {
    Fixture f;
    auto eval = testing::client("e", std::make_shared<mock::HashEvaluatorModel>());
    RefinementConfig cfg;
    cfg.rng_seed = 3;
    const auto r = run_refinement(f.docs, f.cands, f.tuning, f.rating, cfg, hash_models(eval));
    CHECK(r.status == RunStatus::completed);
    REQUIRE(r.iterations.size() == 3);
    for (const auto& c : r.candidates) CHECK(c.rating_history.size() == 3);
    CHECK(r.iterations[0].ratings == 24);
    CHECK(r.state.k == 4);
    CHECK(r.promoted().size() == r.iterations.back().selected_counts.at(2));
    for (const auto& s : r.promoted()) CHECK(s.iteration_found == 3);
}

TEST_CASE("overlapping tuning and rating sets are rejected") {
    Fixture f;
    auto eval = testing::client("e", std::make_shared<mock::HashEvaluatorModel>());
    f.rating.push_back(f.tuning[0]);
    CHECK_THROWS_AS(run_refinement(f.docs, f.cands, f.tuning, f.rating, {}, hash_models(eval)),
                    std::invalid_argument);
    RefinementConfig bad;
    bad.iterations = 0;
    f.rating.pop_back();
    CHECK_THROWS(run_refinement(f.docs, f.cands, f.tuning, f.rating, bad, hash_models(eval)));
}

TEST_CASE("a missing evaluator pauses and a rerun resumes with identical results") {
    Fixture f;
    testing::TempDir dir;
    RefinementConfig cfg;
    cfg.rng_seed = 5;
    auto eval = testing::client("e", std::make_shared<mock::HashEvaluatorModel>());

    IterationModels first_only{[&](int k) { return k == 1 ? eval : nullptr; }, {}};
    const auto paused = run_refinement(f.docs, f.cands, f.tuning, f.rating, cfg, first_only, dir.path());
    CHECK(paused.status == RunStatus::paused);
    CHECK(paused.paused_at == 2);
    CHECK(std::filesystem::exists(dir / "it2" / "checkpoint.json"));
    CHECK(std::filesystem::exists(dir / "it2" / "evaluator_train.jsonl"));
    CHECK(std::filesystem::exists(dir / "it1" / "state.json"));

    const auto resumed = run_refinement(f.docs, f.cands, f.tuning, f.rating, cfg, hash_models(eval), dir.path());
    CHECK(resumed.status == RunStatus::completed);
    REQUIRE(resumed.iterations.size() == 3);
    CHECK(resumed.iterations[0].resumed);
    CHECK_FALSE(resumed.iterations[1].resumed);
    CHECK_FALSE(std::filesystem::exists(dir / "it2" / "checkpoint.json"));

    const auto straight = run_refinement(f.docs, f.cands, f.tuning, f.rating, cfg, hash_models(eval));
    REQUIRE(straight.promoted().size() == resumed.promoted().size());
    for (std::size_t i = 0; i < straight.promoted().size(); ++i)
        CHECK(straight.promoted()[i].id == resumed.promoted()[i].id);
    CHECK(straight.iterations[2].mined_doc_ids == resumed.iterations[2].mined_doc_ids);
}

}  // TEST_SUITE
