#include "xforge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "xforge/log.hpp"
#include "xforge/parallel.hpp"
#include "xforge/templates.hpp"
#include "xforge/text.hpp"

namespace xforge::judge {

void EvalPrompt::validate() const {
    if (id.empty()) throw std::invalid_argument("eval prompt: empty id");
    if (text::trim(text).empty()) throw std::invalid_argument("eval prompt " + id + ": empty text");
    if (difficulty && (*difficulty < 1 || *difficulty > 10))
        throw std::invalid_argument("eval prompt " + id + ": difficulty " + std::to_string(*difficulty) +
                                    " outside 1..10");
}

void to_json(json& j, const EvalPrompt& p) {
    j = json{{"id", p.id}, {"text", p.text}, {"language", p.lang}};
    j["category"] = p.category ? json(*p.category) : json(nullptr);
    j["difficulty"] = p.difficulty ? json(*p.difficulty) : json(nullptr);
}

void from_json(const json& j, EvalPrompt& p) {
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.lang = j.at(j.contains("language") ? "language" : "lang").get<LanguageCode>();
    p.category.reset();
    p.difficulty.reset();
    if (j.contains("category") && !j["category"].is_null()) p.category = j["category"].get<std::string>();
    if (j.contains("difficulty") && !j["difficulty"].is_null()) p.difficulty = j["difficulty"].get<int>();
    p.validate();
}

std::string_view to_string(PassOutcome o) {
    switch (o) {
        case PassOutcome::first_wins: return "first_wins";
        case PassOutcome::second_wins: return "second_wins";
        case PassOutcome::draw: return "draw";
    }
    return "draw";
}

std::string_view to_string(Final f) {
    switch (f) {
        case Final::a_wins: return "a_wins";
        case Final::b_wins: return "b_wins";
        case Final::tie: return "tie";
    }
    return "tie";
}

PassOutcome pass_outcome_from_string(std::string_view s) {
    if (s == "first_wins") return PassOutcome::first_wins;
    if (s == "second_wins") return PassOutcome::second_wins;
    if (s == "draw") return PassOutcome::draw;
    throw std::invalid_argument("unknown pass outcome '" + std::string(s) + "'");
}

Final final_from_string(std::string_view s) {
    if (s == "a_wins") return Final::a_wins;
    if (s == "b_wins") return Final::b_wins;
    if (s == "tie") return Final::tie;
    throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

std::vector<double> JudgeVerdict::subject_scores() const {
    std::vector<double> out;
    if (!passes[0].parse_failure) out.push_back(passes[0].first);
    if (!passes[1].parse_failure) out.push_back(passes[1].second);
    return out;
}

std::vector<double> JudgeVerdict::baseline_scores() const {
    std::vector<double> out;
    if (!passes[0].parse_failure) out.push_back(passes[0].second);
    if (!passes[1].parse_failure) out.push_back(passes[1].first);
    return out;
}

void to_json(json& j, const JudgeVerdict& v) {
    j = json{{"prompt_id", v.prompt_id}, {"final", to_string(v.final)}};
    j["passes"] = json::array();
    for (std::size_t i = 0; i < 2; ++i)
        j["passes"].push_back({{"order", i == 0 ? "ab" : "ba"},
                               {"scores", {v.passes[i].first, v.passes[i].second}},
                               {"outcome", to_string(v.outcomes[i])},
                               {"parse_failure", v.passes[i].parse_failure}});
}

void from_json(const json& j, JudgeVerdict& v) {
    v.prompt_id = j.at("prompt_id").get<std::string>();
    const auto& passes = j.at("passes");
    if (!passes.is_array() || passes.size() != 2)
        throw std::invalid_argument("verdict " + v.prompt_id + ": expected two passes");
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& p = passes[i];
        v.passes[i].first = p.at("scores").at(0).get<double>();
        v.passes[i].second = p.at("scores").at(1).get<double>();
        v.passes[i].parse_failure = p.value("parse_failure", false);
        v.outcomes[i] = pass_outcome_from_string(p.at("outcome").get<std::string>());
    }
    v.final = decide(v.outcomes[0], v.outcomes[1]);
    if (j.contains("final") && final_from_string(j["final"].get<std::string>()) != v.final)
        throw std::invalid_argument("verdict " + v.prompt_id + ": final does not follow from its passes");
}

// ---------------------------------------------------------------------------

Final decide(PassOutcome p1, PassOutcome p2) {
    // Pass 1 presents a first; pass 2 presents b first.
    int a = 0, b = 0;
    if (p1 == PassOutcome::first_wins) ++a;
    if (p1 == PassOutcome::second_wins) ++b;
    if (p2 == PassOutcome::first_wins) ++b;
    if (p2 == PassOutcome::second_wins) ++a;
    if (a > 0 && b == 0) return Final::a_wins;
    if (b > 0 && a == 0) return Final::b_wins;
    return Final::tie;
}

PassOutcome outcome_of(double first, double second) {
    if (first > second) return PassOutcome::first_wins;
    if (second > first) return PassOutcome::second_wins;
    return PassOutcome::draw;
}

namespace {

constexpr const char* kNum = R"((\d+(?:\.\d+)?))";

std::string first_line(std::string_view reply) {
    std::istringstream in{std::string(reply)};
    std::string line;
    while (std::getline(in, line))
        if (!text::trim(line).empty()) return std::string(text::trim(line));
    return {};
}

bool in_range(double x) { return x >= 0 && x <= 10; }

}  // namespace

std::optional<std::pair<double, double>> parse_pair_scores(std::string_view reply, bool strict) {
    static const std::regex strict_re(std::string("^") + kNum + R"(\s+)" + kNum + "$");
    static const std::regex loose_re(std::string("^") + kNum + R"(\s*(?:,|/|;|\s|\band\b|\bvs\.?)\s*)" + kNum +
                                         R"(\s*\.?$)",
                                     std::regex::icase);
    static const std::regex label1(std::string(R"(assistant\s*1[^\d\n]*?[:=]\s*)") + kNum, std::regex::icase);
    static const std::regex label2(std::string(R"(assistant\s*2[^\d\n]*?[:=]\s*)") + kNum, std::regex::icase);

    const auto line = first_line(reply);
    std::smatch m;
    std::optional<std::pair<double, double>> out;
    if (std::regex_match(line, m, strict_re)) {
        out = {std::stod(m[1]), std::stod(m[2])};
    } else if (!strict) {
        if (std::regex_match(line, m, loose_re)) {
            out = {std::stod(m[1]), std::stod(m[2])};
        } else {
            const std::string all(reply);
            std::smatch m1, m2;
            if (std::regex_search(all, m1, label1) && std::regex_search(all, m2, label2))
                out = {std::stod(m1[1]), std::stod(m2[1])};
        }
    }
    if (out && (!in_range(out->first) || !in_range(out->second))) return std::nullopt;
    return out;
}

backends::InferenceRequest pair_request(const EvalPrompt& prompt, std::string_view answer_1,
                                        std::string_view answer_2, const backends::Sampling& sampling) {
    backends::InferenceRequest req;
    req.system_prompt = std::string(templates::kJudgePairSystem);
    req.user_prompt = text::render(templates::kJudgePairUser, {{"question", prompt.text},
                                                               {"answer_1", std::string(answer_1)},
                                                               {"answer_2", std::string(answer_2)}});
    req.sampling = sampling;
    return req;
}

JudgeVerdict judge_pair(const EvalPrompt& prompt, std::string_view resp_a, std::string_view resp_b,
                        backends::ChatClient& judge, const JudgeOptions& opts) {
    if (text::trim(resp_a).empty() || text::trim(resp_b).empty())
        throw std::invalid_argument("judge_pair: empty response for prompt " + prompt.id);
    JudgeVerdict v;
    v.prompt_id = prompt.id;
    const std::array<std::pair<std::string_view, std::string_view>, 2> orders{
        std::pair{resp_a, resp_b}, std::pair{resp_b, resp_a}};
    for (std::size_t i = 0; i < 2; ++i) {
        const auto reply =
            judge.complete(pair_request(prompt, orders[i].first, orders[i].second, opts.sampling));
        if (const auto scores = parse_pair_scores(reply, opts.strict)) {
            v.passes[i] = {scores->first, scores->second, false};
            v.outcomes[i] = outcome_of(scores->first, scores->second);
        } else {
            v.passes[i] = {0, 0, true};
            v.outcomes[i] = PassOutcome::draw;
        }
    }
    v.final = decide(v.outcomes[0], v.outcomes[1]);
    return v;
}

JudgeRun judge_all(const std::vector<EvalPrompt>& prompts,
                   const std::unordered_map<std::string, std::string>& responses_a,
                   const std::unordered_map<std::string, std::string>& responses_b,
                   backends::ChatClient& judge, const JudgeOptions& opts) {
    JudgeRun run;
    std::vector<const EvalPrompt*> todo;
    for (const auto& p : prompts) {
        if (responses_a.count(p.id) && responses_b.count(p.id))
            todo.push_back(&p);
        else
            run.unmatched.push_back(p.id);
    }

    std::vector<std::optional<JudgeVerdict>> verdicts(todo.size());
    std::vector<std::string> errors(todo.size());
    parallel_for(todo.size(), opts.workers ? opts.workers : judge.policy().max_in_flight, [&](std::size_t i) {
        const auto& p = *todo[i];
        try {
            verdicts[i] = judge_pair(p, responses_a.at(p.id), responses_b.at(p.id), judge, opts);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (verdicts[i])
            run.verdicts.push_back(std::move(*verdicts[i]));
        else
            run.failures.emplace_back(todo[i]->id, errors[i]);
    }
    if (!run.failures.empty())
        log::warn("judge: " + std::to_string(run.failures.size()) + " prompt(s) failed");
    return run;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "Easy";
        case Difficulty::medium: return "Medium";
        case Difficulty::hard: return "Hard";
    }
    return "Easy";
}

Difficulty difficulty_bucket(int difficulty) {
    if (difficulty < 1 || difficulty > 10)
        throw std::invalid_argument("difficulty " + std::to_string(difficulty) + " outside 1..10");
    if (difficulty <= 4) return Difficulty::easy;
    if (difficulty <= 7) return Difficulty::medium;
    return Difficulty::hard;
}

void Tally::add(Final f) {
    ++total;
    switch (f) {
        case Final::a_wins: ++a_wins; break;
        case Final::b_wins: ++b_wins; break;
        case Final::tie: ++ties; break;
    }
}

namespace {

json tally_json(const Tally& t) {
    return json{{"total", t.total},
                {"a_wins", t.a_wins},
                {"b_wins", t.b_wins},
                {"ties", t.ties},
                {"win_rate_pct", t.win_rate_pct()}};
}

double mean(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

void to_json(json& j, const WinRateReport& r) {
    j = tally_json(r.overall);
    j["avg_score"] = r.avg_score;
    j["avg_score_baseline"] = r.avg_score_baseline;
    j["scored_passes"] = r.scored_passes;
    j["parse_failures"] = r.parse_failures;
    j["avg_score_basis"] = "mean over both presentation orders, parsed passes only";
    j["by_category"] = json::object();
    for (const auto& [k, t] : r.by_category) j["by_category"][k] = tally_json(t);
    j["by_difficulty"] = json::object();
    for (const auto& [k, t] : r.by_difficulty) j["by_difficulty"][k] = tally_json(t);
}

WinRateReport aggregate(const std::vector<JudgeVerdict>& verdicts,
                        const std::unordered_map<std::string, EvalPrompt>& prompts) {
    if (verdicts.empty()) throw std::invalid_argument("aggregate: no verdicts");
    WinRateReport r;
    std::vector<double> subject, baseline;
    for (const auto& v : verdicts) {
        const auto it = prompts.find(v.prompt_id);
        if (it == prompts.end()) throw std::invalid_argument("aggregate: unknown prompt " + v.prompt_id);
        const auto& p = it->second;
        r.overall.add(v.final);
        r.by_category[p.category.value_or(std::string(kUncategorized))].add(v.final);
        const std::string bucket =
            p.difficulty ? std::string(to_string(difficulty_bucket(*p.difficulty))) : std::string(kUnrated);
        r.by_difficulty[bucket].add(v.final);
        for (const auto& pass : v.passes)
            if (pass.parse_failure) ++r.parse_failures;
        for (double s : v.subject_scores()) subject.push_back(s);
        for (double s : v.baseline_scores()) baseline.push_back(s);
    }
    r.scored_passes = subject.size();
    r.avg_score = round_1dp(mean(subject));
    r.avg_score_baseline = round_1dp(mean(baseline));
    return r;
}

// ---------------------------------------------------------------------------

std::optional<QualityScore> parse_quality(std::string_view reply) {
    static const std::regex slash_re(std::string("^") + kNum + R"(\s*/\s*)" + kNum + R"(\s*/\s*)" + kNum + "$");
    const auto line = first_line(reply);
    std::smatch m;
    if (!std::regex_match(line, m, slash_re)) return std::nullopt;
    QualityScore q{std::stod(m[1]), std::stod(m[2]), std::stod(m[3])};
    if (!in_range(q.helpfulness) || !in_range(q.relevance) || !in_range(q.accuracy)) return std::nullopt;
    return q;
}

backends::InferenceRequest quality_request(const EvalPrompt& prompt, std::string_view response,
                                           const backends::Sampling& sampling) {
    backends::InferenceRequest req;
    req.system_prompt = std::string(templates::kJudgePairSystem);
    req.user_prompt = text::render(templates::kJudgeQualityUser,
                                   {{"question", prompt.text}, {"answer", std::string(response)}});
    req.sampling = sampling;
    return req;
}

std::optional<QualityScore> judge_quality(const EvalPrompt& prompt, std::string_view response,
                                          backends::ChatClient& judge, const JudgeOptions& opts) {
    if (text::trim(response).empty())
        throw std::invalid_argument("judge_quality: empty response for prompt " + prompt.id);
    return parse_quality(judge.complete(quality_request(prompt, response, opts.sampling)));
}

QualitySummary summarize_quality(const std::vector<std::optional<QualityScore>>& scores) {
    QualitySummary s;
    double h = 0, r = 0, a = 0;
    for (const auto& q : scores) {
        if (!q) {
            ++s.missing;
            continue;
        }
        ++s.scored;
        h += q->helpfulness;
        r += q->relevance;
        a += q->accuracy;
    }
    if (s.scored) {
        const double n = static_cast<double>(s.scored);
        s.mean = {round_1dp(h / n), round_1dp(r / n), round_1dp(a / n)};
    }
    return s;
}

void to_json(json& j, const QualitySummary& s) {
    j = json{{"scored", s.scored},
             {"missing", s.missing},
             {"helpfulness", s.mean.helpfulness},
             {"relevance", s.mean.relevance},
             {"accuracy", s.mean.accuracy}};
}

// ---------------------------------------------------------------------------

std::string format_ws_table(const std::vector<ReportCell>& cells) {
    std::vector<std::string> models;
    std::vector<LanguageCode> langs;
    std::map<std::pair<std::string, std::string>, const WinRateReport*> at;
    for (const auto& c : cells) {
        if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
        if (std::find(langs.begin(), langs.end(), c.lang) == langs.end()) langs.push_back(c.lang);
        at[{c.model, c.lang.code()}] = &c.report;
    }

    std::size_t name_w = 5;
    for (const auto& m : models) name_w = std::max(name_w, m.size());

    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << std::left << std::setw(static_cast<int>(name_w)) << "" << " |";
    for (const auto& l : langs) os << std::right << std::setw(11) << l.code() << " |";
    os << std::setw(11) << "Avg" << " |\n";
    os << std::left << std::setw(static_cast<int>(name_w)) << "Model" << " |";
    for (std::size_t i = 0; i <= langs.size(); ++i) os << std::right << std::setw(5) << "W" << std::setw(6) << "S" << " |";
    os << "\n" << std::string(name_w + 1, '-') << "+";
    for (std::size_t i = 0; i <= langs.size(); ++i) os << std::string(12, '-') << "+";
    os << "\n";

    for (const auto& m : models) {
        os << std::left << std::setw(static_cast<int>(name_w)) << m << " |";
        double w_sum = 0, s_sum = 0;
        std::size_t present = 0;
        for (const auto& l : langs) {
            const auto it = at.find({m, l.code()});
            if (it == at.end()) {
                os << std::right << std::setw(5) << "-" << std::setw(6) << "-" << " |";
                continue;
            }
            const auto& r = *it->second;
            os << std::right << std::setw(5) << r.win_rate_pct() << std::setw(6) << r.avg_score << " |";
            w_sum += r.win_rate_pct();
            s_sum += r.avg_score;
            ++present;
        }
        if (present)
            os << std::right << std::setw(5) << round_1dp(w_sum / static_cast<double>(present))
               << std::setw(6) << round_1dp(s_sum / static_cast<double>(present)) << " |\n";
        else
            os << std::right << std::setw(5) << "-" << std::setw(6) << "-" << " |\n";
    }
    return os.str();
}

std::vector<EvalPrompt> load_prompts(const std::filesystem::path& path) {
    return from_json_records<EvalPrompt>(load_jsonl(path));
}

std::unordered_map<std::string, std::string> load_responses(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> out;
    for (const auto& rec : load_jsonl(path)) {
        const auto id = rec.at("prompt_id").get<std::string>();
        if (!out.emplace(id, rec.at("response").get<std::string>()).second)
            throw std::invalid_argument(path.string() + ": duplicate response for prompt " + id);
    }
    return out;
}

}  // namespace xforge::judge
