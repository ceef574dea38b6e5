#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xforge/backends.hpp"
#include "xforge/corpus.hpp"
#include "xforge/generation.hpp"
#include "xforge/sample.hpp"

namespace xforge::refinement {

// ---------------------------------------------------------------------------
// Corruption of a vanilla response

/// Byte ranges of sentence-like segments. Boundaries follow sentence
/// terminators (. ! ? and the Devanagari, Urdu, Thai-style and CJK stops) or
/// newlines; trailing whitespace stays with its segment. When fewer than two
/// sentences are found the text is cut into spans of `fallback_width`
/// scalars instead.
struct Segment {
    std::size_t begin;
    std::size_t end;
};

inline constexpr std::size_t kFallbackSpanWidth = 32;

std::vector<Segment> segment(std::string_view text, std::size_t fallback_width = kFallbackSpanWidth);

class NotCorruptible : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Fraction of segments a deletion may remove at most (rounded up).
inline constexpr double kMaxDeleteFraction = 0.4;

/// Removes between 1 and ceil(40%) contiguous segments. Throws NotCorruptible
/// for input with fewer than two segments.
std::string corrupt_delete(std::string_view response, std::uint64_t rng_seed);

/// Re-inserts one seeded segment directly after itself.
std::string corrupt_duplicate(std::string_view response, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Pseudo-rating data

enum class Provenance { vanilla, mismatched, deleted, duplicated, model_output };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);
int score_for(Provenance p);

struct RatingTriple {
    std::string instruction_en;
    std::string response;
    int score = 2;
    Provenance provenance = Provenance::vanilla;
    std::string source_sample_id;
    LanguageCode lang;
};

void to_json(json& j, const RatingTriple& t);
void from_json(const json& j, RatingTriple& t);

/// Relative weights of the three flawed-response sources.
struct FlawMixture {
    double deleted = 0.4;
    double duplicated = 0.4;
    double model_output = 0.2;

    static FlawMixture with_follower() { return {0.4, 0.4, 0.2}; }
    static FlawMixture without_follower() { return {0.5, 0.5, 0.0}; }
};

struct RatingSynthesisOptions {
    /// Empty: FlawMixture::with_follower() or without_follower() by availability.
    std::optional<FlawMixture> mixture;
    backends::Sampling follower_sampling{0.9, 0.7, 1024};
    std::size_t workers = 0;
};

/// Three triples per source sample, in the order score 2, 0, 1. Throws
/// std::invalid_argument for fewer than two samples or when a sample has no
/// partner with a different output.
std::vector<RatingTriple> synth_rating_set(const std::vector<XSample>& rating_source,
                                           backends::ChatClient* follower, std::uint64_t rng_seed,
                                           const RatingSynthesisOptions& opts = {});

/// Rating prompt shared by training export and scoring.
backends::InferenceRequest evaluator_request(const LanguageCode& lang, std::string_view instruction,
                                             std::string_view response);

/// Evaluator training examples: assistant is the score as one digit.
std::vector<generation::FineTuneRecord> export_evaluator_train(
    const std::vector<RatingTriple>& triples);

/// Follower training examples: seed samples use the seed system prompt,
/// mined ones the web-knowledge prompt.
std::vector<generation::FineTuneRecord> export_follower_train(const std::vector<XSample>& dx);

backends::InferenceRequest follower_request(const LanguageCode& lang, std::string_view instruction,
                                            const backends::Sampling& sampling);

// ---------------------------------------------------------------------------
// Scoring and selection

/// "0", "1" or "2" with optional surrounding whitespace; anything else is empty.
std::optional<int> parse_rating(std::string_view reply);

struct ScoreResult {
    std::vector<generation::Candidate> candidates;
    std::size_t parse_failures = 0;
    std::size_t skipped = 0;
};

/// Adds rating_history[k] to every candidate. Unparseable replies rate 0;
/// candidates whose evaluator calls exhaust retries are dropped and counted.
/// Throws std::invalid_argument if a doc_id is not in the index.
ScoreResult score_candidates(const std::vector<generation::Candidate>& cands,
                             const corpus::DocumentIndex& docs, backends::ChatClient& evaluator,
                             int k, std::size_t workers = 0);

struct IterationState {
    int k = 1;
    std::vector<XSample> dx;
    std::map<int, std::size_t> selected_counts;
    std::size_t mined = 0;
    json config_snapshot;
};

void to_json(json& j, const IterationState& s);

/// Promotes candidates rated exactly 2 at iteration k (seeded downsample to
/// `cap` if needed) and unions them with the tuning seed. Returns the state
/// for iteration k+1.
IterationState select_best(const std::vector<generation::Candidate>& cands,
                           const corpus::DocumentIndex& docs, int k, std::size_t cap,
                           const std::vector<XSample>& tuning_seed, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Iteration driver

struct RefinementConfig {
    int iterations = 3;
    std::size_t promotion_cap = 200000;
    std::uint64_t rng_seed = 0;
    RatingSynthesisOptions synthesis;
    std::size_t workers = 0;
};

void to_json(json& j, const RefinementConfig& c);

/// Models available at iteration k. A null evaluator means the k-th
/// evaluator is not ready yet; a null follower means none is served.
struct IterationModels {
    std::function<std::shared_ptr<backends::ChatClient>(int k)> evaluator;
    std::function<std::shared_ptr<backends::ChatClient>(int k)> follower;
};

struct IterationSummary {
    int k = 0;
    std::size_t ratings = 0;
    std::size_t scored = 0;
    std::size_t parse_failures = 0;
    std::size_t skipped = 0;
    std::map<int, std::size_t> selected_counts;
    std::vector<std::string> mined_doc_ids;
    bool resumed = false;
};

void to_json(json& j, const IterationSummary& s);

enum class RunStatus { completed, paused };

struct RefinementResult {
    RunStatus status = RunStatus::completed;
    /// Iteration awaiting its evaluator when paused.
    int paused_at = 0;
    std::vector<generation::Candidate> candidates;
    IterationState state;
    std::vector<IterationSummary> iterations;

    /// Mined samples of the last completed iteration.
    std::vector<XSample> promoted() const;
};

/// Runs rating synthesis, evaluator export, scoring and selection for
/// k = 1..iterations. With a run directory, each iteration writes
/// it<k>/{ratings,evaluator_train,follower_train,scored,dx}.jsonl and
/// state.json; a completed iteration found on disk is loaded instead of
/// recomputed, so a paused run resumes where it stopped.
RefinementResult run_refinement(const std::vector<corpus::Document>& docs,
                                const std::vector<generation::Candidate>& cands,
                                const std::vector<XSample>& tuning_seed,
                                const std::vector<XSample>& rating_source,
                                const RefinementConfig& config, const IterationModels& models,
                                const std::optional<std::filesystem::path>& run_dir = std::nullopt);

}  // namespace xforge::refinement
