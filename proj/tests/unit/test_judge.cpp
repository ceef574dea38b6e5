#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "test_support.hpp"
#include "xforge/judge.hpp"
#include "xforge/mock_backends.hpp"

using namespace xforge;
using namespace xforge::judge;

namespace {

const LanguageCode kSw{"sw"};

EvalPrompt prompt(std::string id, std::optional<std::string> cat = {}, std::optional<int> diff = {}) {
    return {std::move(id), "What is the capital of Kenya?", kSw, std::move(cat), diff};
}

JudgeVerdict verdict(std::string id, Final f, double subj = 8, double base = 6) {
    JudgeVerdict v;
    v.prompt_id = std::move(id);
    v.passes[0] = {subj, base, false};
    v.passes[1] = {base, subj, false};
    v.final = f;
    return v;
}

std::unordered_map<std::string, EvalPrompt> index(const std::vector<EvalPrompt>& ps) {
    std::unordered_map<std::string, EvalPrompt> out;
    for (const auto& p : ps) out.emplace(p.id, p);
    return out;
}

const PassOutcome kAll[] = {PassOutcome::first_wins, PassOutcome::second_wins, PassOutcome::draw};

}  // namespace

TEST_SUITE("judge decision") {

TEST_CASE("all nine pass combinations match the case table") {
    int cases = 0;
    for (auto p1 : kAll)
        for (auto p2 : kAll) {
            CAPTURE(to_string(p1));
            CAPTURE(to_string(p2));
            CHECK(decide(p1, p2) == testing::decision_oracle(p1, p2));
            ++cases;
        }
    CHECK(cases == 9);
}

TEST_CASE("decision is symmetric under swapping the two models") {
    // Swapping a and b swaps which pass shows which model first.
    auto flip = [](Final f) {
        if (f == Final::a_wins) return Final::b_wins;
        if (f == Final::b_wins) return Final::a_wins;
        return Final::tie;
    };
    for (auto p1 : kAll)
        for (auto p2 : kAll) CHECK(decide(p2, p1) == flip(decide(p1, p2)));
}

TEST_CASE("outcome of a score pair") {
    CHECK(outcome_of(8, 7) == PassOutcome::first_wins);
    CHECK(outcome_of(6.5, 7) == PassOutcome::second_wins);
    CHECK(outcome_of(5, 5) == PassOutcome::draw);
}

TEST_CASE("string forms round trip") {
    for (auto o : kAll) CHECK(pass_outcome_from_string(to_string(o)) == o);
    for (auto f : {Final::a_wins, Final::b_wins, Final::tie}) CHECK(final_from_string(to_string(f)) == f);
    CHECK_THROWS(final_from_string("win"));
}

}  // TEST_SUITE

TEST_SUITE("judge parsing") {

TEST_CASE("strict form is two numbers on the first non-empty line") {
    using P = std::pair<double, double>;
    CHECK(parse_pair_scores("8 7\nbecause", true) == P{8, 7});
    CHECK(parse_pair_scores("\n  9.5 3  \nx", true) == P{9.5, 3});
    CHECK_FALSE(parse_pair_scores("8, 7", true));
    CHECK_FALSE(parse_pair_scores("Assistant 1: 8\nAssistant 2: 7", true));
    CHECK_FALSE(parse_pair_scores("11 3", true));
    CHECK_FALSE(parse_pair_scores("", true));
}

TEST_CASE("lenient forms") {
    using P = std::pair<double, double>;
    CHECK(parse_pair_scores("8, 7") == P{8, 7});
    CHECK(parse_pair_scores("8/7") == P{8, 7});
    CHECK(parse_pair_scores("8 and 7.") == P{8, 7});
    CHECK(parse_pair_scores("Scores below.\nAssistant 1: 6\nAssistant 2 = 9") == P{6, 9});
    CHECK(parse_pair_scores("Assistant 1 score: 4, Assistant 2 score: 10") == P{4, 10});
    CHECK_FALSE(parse_pair_scores("Both answers are good."));
    CHECK_FALSE(parse_pair_scores("8 12"));
}

TEST_CASE("pair request places answers in presentation order") {
    const auto r = pair_request(prompt("p"), "ALPHA", "BETA", {1.0, 0.0, 512});
    CHECK(r.user_prompt.find("ALPHA") < r.user_prompt.find("BETA"));
    CHECK(r.user_prompt.find("capital of Kenya") != std::string::npos);
    CHECK(r.sampling.temperature == 0.0);
}

}  // TEST_SUITE

TEST_SUITE("judge runs") {

TEST_CASE("position-biased judge yields only ties") {
    std::vector<EvalPrompt> ps;
    std::unordered_map<std::string, std::string> a, b;
    for (int i = 0; i < 40; ++i) {
        const auto id = "p" + std::to_string(i);
        ps.push_back(prompt(id));
        a[id] = "answer a " + std::to_string(i);
        b[id] = "answer b " + std::to_string(i * 7);
    }
    auto judge = testing::client("j", std::make_shared<mock::PositionBiasedJudgeModel>());
    const auto run = judge_all(ps, a, b, *judge);
    REQUIRE(run.verdicts.size() == 40);
    for (const auto& v : run.verdicts) CHECK(v.final == Final::tie);
    const auto rep = aggregate(run.verdicts, index(ps));
    CHECK(rep.overall.ties == 40);
    CHECK(rep.win_rate_pct() == 0.0);
    // Each side scores 7 once and 6 once.
    CHECK(rep.avg_score == 6.5);
    CHECK(rep.avg_score_baseline == 6.5);
}

TEST_CASE("content judge rewards the better answer in either order") {
    auto score = [](std::string_view ans) { return ans.find("good") != std::string_view::npos ? 9.0 : 3.0; };
    auto judge = testing::client("j", std::make_shared<mock::ContentJudgeModel>(score));
    const auto p = prompt("p");
    const auto win = judge_pair(p, "a good answer", "a weak answer", *judge);
    CHECK(win.final == Final::a_wins);
    CHECK(win.outcomes[0] == PassOutcome::first_wins);
    CHECK(win.outcomes[1] == PassOutcome::second_wins);
    CHECK(win.subject_scores() == std::vector<double>{9, 9});
    CHECK(judge_pair(p, "a weak answer", "a good answer", *judge).final == Final::b_wins);
    CHECK(judge_pair(p, "good one", "good two", *judge).final == Final::tie);
    CHECK_THROWS_AS(judge_pair(p, "  ", "x", *judge), std::invalid_argument);
}

TEST_CASE("an unparseable pass counts as a draw") {
    int call = 0;
    auto judge = testing::client("j", std::make_shared<mock::FunctionModel>([&](const backends::InferenceRequest&) {
        return ++call == 1 ? std::string("9 2") : std::string("no scores here");
    }));
    const auto v = judge_pair(prompt("p"), "x", "y", *judge);
    CHECK(v.passes[1].parse_failure);
    CHECK(v.outcomes[1] == PassOutcome::draw);
    CHECK(v.final == Final::a_wins);
    CHECK(v.subject_scores() == std::vector<double>{9});
    const auto rep = aggregate({v}, index({prompt("p")}));
    CHECK(rep.parse_failures == 1);
    CHECK(rep.scored_passes == 1);
}

TEST_CASE("judge_all reports unmatched prompts and failures without aborting") {
    std::vector<EvalPrompt> ps{prompt("p1"), prompt("p2"), prompt("p3")};
    std::unordered_map<std::string, std::string> a{{"p1", "x"}, {"p2", ""}, {"p3", "z"}};
    std::unordered_map<std::string, std::string> b{{"p1", "y"}, {"p2", "w"}};
    auto judge = testing::client("j", std::make_shared<mock::PositionBiasedJudgeModel>());
    const auto run = judge_all(ps, a, b, *judge, {.workers = 2});
    CHECK(run.verdicts.size() == 1);
    CHECK(run.verdicts[0].prompt_id == "p1");
    REQUIRE(run.failures.size() == 1);
    CHECK(run.failures[0].first == "p2");
    CHECK(run.unmatched == std::vector<std::string>{"p3"});
}

TEST_CASE("verdict json round trip and consistency check") {
    JudgeVerdict v = verdict("p", Final::a_wins);
    v.outcomes = {PassOutcome::first_wins, PassOutcome::second_wins};
    json j = v;
    const auto back = j.get<JudgeVerdict>();
    CHECK(back.final == Final::a_wins);
    CHECK(back.passes[1].second == 8);
    j["final"] = "b_wins";
    CHECK_THROWS(j.get<JudgeVerdict>());
}

}  // TEST_SUITE

TEST_SUITE("judge aggregation") {

TEST_CASE("win rate 49 of 80 reports 61.3") {
    std::vector<EvalPrompt> ps;
    std::vector<JudgeVerdict> vs;
    for (int i = 0; i < 80; ++i) {
        const auto id = "p" + std::to_string(i);
        ps.push_back(prompt(id));
        vs.push_back(verdict(id, i < 49 ? Final::a_wins : (i < 70 ? Final::b_wins : Final::tie)));
    }
    const auto rep = aggregate(vs, index(ps));
    CHECK(rep.overall.total == 80);
    CHECK(rep.overall.a_wins == 49);
    CHECK(rep.overall.b_wins == 21);
    CHECK(rep.overall.ties == 10);
    CHECK(rep.win_rate_pct() == 61.3);
    CHECK(rep.avg_score == 8.0);
    CHECK(rep.avg_score_baseline == 6.0);
}

TEST_CASE("difficulty buckets") {
    const std::pair<int, Difficulty> expect[] = {{1, Difficulty::easy},   {4, Difficulty::easy},
                                                 {5, Difficulty::medium}, {7, Difficulty::medium},
                                                 {8, Difficulty::hard},   {10, Difficulty::hard}};
    for (const auto& [d, b] : expect) CHECK(difficulty_bucket(d) == b);
    CHECK(to_string(Difficulty::medium) == "Medium");
    CHECK_THROWS(difficulty_bucket(0));
    CHECK_THROWS(difficulty_bucket(11));
}

TEST_CASE("breakdowns by category and difficulty with fallbacks") {
    std::vector<EvalPrompt> ps{prompt("a", "math", 2), prompt("b", "math", 9), prompt("c", {}, 6),
                               prompt("d", "writing", {})};
    std::vector<JudgeVerdict> vs{verdict("a", Final::a_wins), verdict("b", Final::b_wins),
                                 verdict("c", Final::a_wins), verdict("d", Final::tie)};
    const auto rep = aggregate(vs, index(ps));
    CHECK(rep.by_category.at("math").total == 2);
    CHECK(rep.by_category.at("math").a_wins == 1);
    CHECK(rep.by_category.at(std::string(kUncategorized)).a_wins == 1);
    CHECK(rep.by_difficulty.at("Easy").a_wins == 1);
    CHECK(rep.by_difficulty.at("Hard").b_wins == 1);
    CHECK(rep.by_difficulty.at("Medium").total == 1);
    CHECK(rep.by_difficulty.at(std::string(kUnrated)).ties == 1);

    const json j = rep;
    CHECK(j["win_rate_pct"] == 50.0);
    CHECK(j["by_category"]["writing"]["ties"] == 1);
    CHECK_THROWS(aggregate({}, index(ps)));
    CHECK_THROWS(aggregate({verdict("zz", Final::tie)}, index(ps)));
}

TEST_CASE("quality rubric parsing and summary") {
    const auto q = parse_quality("7/8.5/6\nreasons");
    REQUIRE(q);
    CHECK(q->relevance == 8.5);
    CHECK_FALSE(parse_quality("7/8"));
    CHECK_FALSE(parse_quality("7/11/2"));
    const auto s = summarize_quality({QualityScore{7, 8, 6}, std::nullopt, QualityScore{8, 8, 5}, QualityScore{6, 7, 5}});
    CHECK(s.scored == 3);
    CHECK(s.missing == 1);
    CHECK(s.mean.helpfulness == 7.0);
    CHECK(s.mean.relevance == 7.7);
    CHECK(s.mean.accuracy == 5.3);
}

TEST_CASE("ws table lists every model and language with an average column") {
    WinRateReport r1, r2;
    r1.overall = {10, 6, 2, 2};
    r1.avg_score = 7.5;
    r2.overall = {10, 3, 5, 2};
    r2.avg_score = 6.0;
    const auto t = format_ws_table({{"ours", kSw, r1}, {"ours", LanguageCode("hi"), r2}, {"base", kSw, r2}});
    CHECK(t.find("ours") != std::string::npos);
    CHECK(t.find("base") != std::string::npos);
    CHECK(t.find("Avg") != std::string::npos);
    CHECK(t.find("60.0") != std::string::npos);
    CHECK(t.find("45.0") != std::string::npos);  // mean of 60.0 and 30.0
    CHECK(t.find("6.8") != std::string::npos);   // mean of 7.5 and 6.0, rounded
}

TEST_CASE("prompt and response loaders") {
    testing::TempDir dir;
    {
        std::ofstream out(dir / "p.jsonl");
        out << R"({"id":"p1","text":"Hello?","language":"sw","category":"chat","difficulty":3})" << "\n"
            << R"({"id":"p2","text":"Bye?","lang":"sw"})" << "\n";
        std::ofstream r(dir / "r.jsonl");
        r << R"({"prompt_id":"p1","response":"Jambo"})" << "\n";
        std::ofstream dup(dir / "d.jsonl");
        dup << R"({"prompt_id":"p1","response":"a"})" << "\n" << R"({"prompt_id":"p1","response":"b"})" << "\n";
        std::ofstream bad(dir / "bad.jsonl");
        bad << R"({"id":"p1","text":"Hi","language":"sw","difficulty":12})" << "\n";
    }
    const auto ps = load_prompts(dir / "p.jsonl");
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].difficulty == 3);
    CHECK_FALSE(ps[1].category);
    CHECK(load_responses(dir / "r.jsonl").at("p1") == "Jambo");
    CHECK_THROWS(load_responses(dir / "d.jsonl"));
    CHECK_THROWS(load_prompts(dir / "bad.jsonl"));
}

}  // TEST_SUITE
