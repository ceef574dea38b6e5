#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xforge/backends.hpp"
#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"
#include "xforge/numeric.hpp"

namespace xforge::judge {

// ---------------------------------------------------------------------------
// Types

struct EvalPrompt {
    std::string id;
    std::string text;
    LanguageCode lang;
    std::optional<std::string> category;
    std::optional<int> difficulty;

    void validate() const;
};

void to_json(json& j, const EvalPrompt& p);
void from_json(const json& j, EvalPrompt& p);

/// Outcome of one judge call, relative to presentation order.
enum class PassOutcome { first_wins, second_wins, draw };
/// Outcome of a pair from the subject model's (a's) point of view.
enum class Final { a_wins, b_wins, tie };

std::string_view to_string(PassOutcome o);
std::string_view to_string(Final f);
PassOutcome pass_outcome_from_string(std::string_view s);
Final final_from_string(std::string_view s);

struct PassScores {
    /// Scores in presentation order; zero when the reply did not parse.
    double first = 0;
    double second = 0;
    bool parse_failure = false;
};

struct JudgeVerdict {
    std::string prompt_id;
    /// Pass 0 presents (a, b); pass 1 presents (b, a).
    std::array<PassScores, 2> passes;
    std::array<PassOutcome, 2> outcomes{PassOutcome::draw, PassOutcome::draw};
    Final final = Final::tie;

    /// Subject scores from passes that parsed.
    std::vector<double> subject_scores() const;
    std::vector<double> baseline_scores() const;
};

void to_json(json& j, const JudgeVerdict& v);
void from_json(const json& j, JudgeVerdict& v);

// ---------------------------------------------------------------------------
// Decision rule

/// p1 judged (a, b), p2 judged (b, a). A side wins when it wins both passes
/// or wins one and draws the other. Split decisions and double draws tie.
Final decide(PassOutcome p1, PassOutcome p2);

/// Higher score wins; equal scores draw.
PassOutcome outcome_of(double first, double second);

// ---------------------------------------------------------------------------
// Judge calls

/// Reads two scores in [0, 10] from the first non-empty line ("8 7",
/// "8, 7", "8/7") or, outside strict mode, from labelled forms such as
/// "Assistant 1: 8 ... Assistant 2: 7".
std::optional<std::pair<double, double>> parse_pair_scores(std::string_view reply, bool strict = false);

struct JudgeOptions {
    bool strict = false;
    backends::Sampling sampling{1.0, 0.0, 512};
    std::size_t workers = 0;
};

backends::InferenceRequest pair_request(const EvalPrompt& prompt, std::string_view answer_1,
                                        std::string_view answer_2, const backends::Sampling& sampling);

/// Two judge calls, (a, b) then (b, a). Throws std::invalid_argument for an
/// empty response; backend failures propagate.
JudgeVerdict judge_pair(const EvalPrompt& prompt, std::string_view resp_a, std::string_view resp_b,
                        backends::ChatClient& judge, const JudgeOptions& opts = {});

struct JudgeRun {
    std::vector<JudgeVerdict> verdicts;
    /// Prompt ids whose judge calls failed, with the error.
    std::vector<std::pair<std::string, std::string>> failures;
    /// Prompt ids lacking a response on either side.
    std::vector<std::string> unmatched;
};

/// Judges every prompt that has a response on both sides, in parallel.
/// Verdicts follow prompt order.
JudgeRun judge_all(const std::vector<EvalPrompt>& prompts,
                   const std::unordered_map<std::string, std::string>& responses_a,
                   const std::unordered_map<std::string, std::string>& responses_b,
                   backends::ChatClient& judge, const JudgeOptions& opts = {});

// ---------------------------------------------------------------------------
// Aggregation

enum class Difficulty { easy, medium, hard };

std::string_view to_string(Difficulty d);

/// Easy [1, 4], Medium [5, 7], Hard [8, 10]. Throws outside 1..10.
Difficulty difficulty_bucket(int difficulty);

struct Tally {
    std::size_t total = 0;
    std::size_t a_wins = 0;
    std::size_t b_wins = 0;
    std::size_t ties = 0;

    double win_rate_pct() const { return percent_1dp(a_wins, total); }
    void add(Final f);
};

struct WinRateReport {
    Tally overall;
    /// Mean subject score over every parsed pass of every verdict, one decimal.
    double avg_score = 0;
    double avg_score_baseline = 0;
    std::size_t scored_passes = 0;
    std::size_t parse_failures = 0;
    std::map<std::string, Tally> by_category;
    std::map<std::string, Tally> by_difficulty;

    double win_rate_pct() const { return overall.win_rate_pct(); }
};

inline constexpr std::string_view kUncategorized = "uncategorized";
inline constexpr std::string_view kUnrated = "Unrated";

void to_json(json& j, const WinRateReport& r);

/// Throws std::invalid_argument for an empty list or an unknown prompt id.
WinRateReport aggregate(const std::vector<JudgeVerdict>& verdicts,
                        const std::unordered_map<std::string, EvalPrompt>& prompts);

// ---------------------------------------------------------------------------
// Single-response rubric

struct QualityScore {
    double helpfulness = 0;
    double relevance = 0;
    double accuracy = 0;
};

/// "h/r/a" on the first non-empty line, each a number in [0, 10].
std::optional<QualityScore> parse_quality(std::string_view reply);

backends::InferenceRequest quality_request(const EvalPrompt& prompt, std::string_view response,
                                           const backends::Sampling& sampling);

/// Empty when the reply does not parse.
std::optional<QualityScore> judge_quality(const EvalPrompt& prompt, std::string_view response,
                                          backends::ChatClient& judge, const JudgeOptions& opts = {});

struct QualitySummary {
    std::size_t scored = 0;
    std::size_t missing = 0;
    QualityScore mean;
};

/// Means over present scores, rounded to one decimal; missing values are
/// counted and excluded.
QualitySummary summarize_quality(const std::vector<std::optional<QualityScore>>& scores);

void to_json(json& j, const QualitySummary& s);

// ---------------------------------------------------------------------------
// Reports

struct ReportCell {
    std::string model;
    LanguageCode lang;
    WinRateReport report;
};

/// Plain-text table with one row per model and a W/S column pair per
/// language plus the average.
std::string format_ws_table(const std::vector<ReportCell>& cells);

std::vector<EvalPrompt> load_prompts(const std::filesystem::path& path);
/// Reads {prompt_id, response} records.
std::unordered_map<std::string, std::string> load_responses(const std::filesystem::path& path);

}  // namespace xforge::judge
