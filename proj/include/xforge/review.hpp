#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"

namespace xforge::review {

enum class TaskKind { quality, preference };
enum class Permutation { ab, ba };
/// Raw preference as clicked by the annotator.
enum class Choice { left, right, tie };
/// Preference after undoing the permutation.
enum class Winner { model_a, model_b, tie };

std::string_view to_string(TaskKind k);
std::string_view to_string(Permutation p);
std::string_view to_string(Choice c);
std::string_view to_string(Winner w);
TaskKind task_kind_from_string(std::string_view s);
Choice choice_from_string(std::string_view s);

/// Maps a left/right/tie choice back to the model it was attributed to.
Winner derandomize(Choice c, Permutation p);
/// Inverse of derandomize: where the winning model was shown.
Choice permute(Winner w, Permutation p);

struct QualityPayload {
    std::string instruction_en;
    std::string text;
    LanguageCode lang;
    std::string sample_id;
};

struct PreferencePayload {
    std::string prompt;
    LanguageCode lang;
    std::string answer_left;
    std::string answer_right;
    Permutation permutation = Permutation::ab;
    std::string model_a;
    std::string model_b;
};

struct ReviewTask {
    std::string task_id;
    TaskKind kind = TaskKind::quality;
    std::optional<QualityPayload> quality;
    std::optional<PreferencePayload> preference;

    void validate() const;
};

/// Storage form, including the permutation and model names.
void to_json(json& j, const ReviewTask& t);
void from_json(const json& j, ReviewTask& t);

/// What an annotator sees: no permutation, no model names.
json blinded_view(const ReviewTask& t);

inline constexpr std::size_t kDefaultQualityAnnotators = 5;
inline constexpr std::size_t kDefaultPreferenceAnnotators = 3;

ReviewTask make_quality_task(std::string task_id, QualityPayload payload);

struct PreferenceItem {
    std::string prompt_id;
    std::string prompt;
    LanguageCode lang;
    std::string answer_a;
    std::string answer_b;
};

/// One task per item; the left/right order is drawn once here, seeded by
/// task id, and never re-drawn on fetch.
std::vector<ReviewTask> make_preference_tasks(const std::vector<PreferenceItem>& items,
                                              const std::string& model_a, const std::string& model_b,
                                              std::uint64_t rng_seed);

struct QualityAnswer {
    bool valid_task = false;
    bool acceptable_response = false;
};

struct Annotation {
    std::string task_id;
    std::string annotator_id;
    TaskKind kind = TaskKind::quality;
    std::optional<QualityAnswer> quality;
    std::optional<Choice> choice;
    /// Filled by the store for preference tasks.
    std::optional<Winner> winner;
    std::string submitted_at;
};

void to_json(json& j, const Annotation& a);
/// Accepts the wire form {task_id, annotator_id, answer}, where answer is
/// {valid_task, acceptable_response} ("yes"/"no" or booleans) or one of
/// "left", "right", "tie".
void from_json(const json& j, Annotation& a);

// ---------------------------------------------------------------------------
// Errors, mapped to HTTP statuses by the server

class ReviewError : public std::runtime_error {
public:
    ReviewError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct ValidationError : ReviewError {
    explicit ValidationError(const std::string& w) : ReviewError(400, w) {}
};
struct AuthError : ReviewError {
    explicit AuthError(const std::string& w) : ReviewError(401, w) {}
};
struct NotFoundError : ReviewError {
    explicit NotFoundError(const std::string& w) : ReviewError(404, w) {}
};
struct ConflictError : ReviewError {
    explicit ConflictError(const std::string& w) : ReviewError(409, w) {}
};

// ---------------------------------------------------------------------------
// Store

struct YesRate {
    std::size_t yes = 0;
    std::size_t total = 0;
    double pct() const;
};

struct PreferenceCounts {
    std::size_t model_a = 0;
    std::size_t model_b = 0;
    std::size_t tie = 0;
    std::size_t total() const { return model_a + model_b + tie; }
};

struct Summary {
    YesRate valid_task;
    YesRate acceptable_response;
    std::map<std::string, std::pair<YesRate, YesRate>> quality_by_lang;
    /// Keyed by "model_a vs model_b".
    std::map<std::string, PreferenceCounts> preference;
    std::size_t annotations = 0;
    std::size_t annotators = 0;
    /// Tasks with at least the default number of annotators for their kind.
    std::size_t fully_covered_tasks = 0;
};

void to_json(json& j, const Summary& s);

/// Tasks plus an append-only annotation log. Every accepted annotation is
/// flushed and synced before submit returns; reopening replays the log.
class ReviewStore {
public:
    using Clock = std::function<std::string()>;

    ReviewStore(std::vector<ReviewTask> tasks, std::optional<std::filesystem::path> log_path,
                Clock clock = {});
    ~ReviewStore();

    ReviewStore(const ReviewStore&) = delete;
    ReviewStore& operator=(const ReviewStore&) = delete;

    static std::unique_ptr<ReviewStore> open(const std::filesystem::path& tasks_path,
                                             const std::filesystem::path& log_path, Clock clock = {});

    void register_annotator(const std::string& id);
    bool is_registered(const std::string& id) const;

    /// Next task this annotator has not answered, cycling from where their
    /// previous fetch stopped. Empty when all are answered.
    std::optional<ReviewTask> next_task(const std::string& annotator_id);

    /// Returns the stored annotation with winner and timestamp filled in.
    Annotation submit(Annotation a);

    /// Throws NotFoundError when nothing has been annotated yet.
    Summary summarize() const;

    std::size_t task_count() const { return tasks_.size(); }
    std::size_t annotation_count() const;
    std::size_t replay_skipped() const { return replay_skipped_; }
    std::vector<Annotation> annotations() const;

private:
    Annotation accept_locked(Annotation a);
    void append(const Annotation& a);

    mutable std::mutex mu_;
    std::vector<ReviewTask> tasks_;
    std::unordered_map<std::string, std::size_t> index_;
    std::set<std::string> annotators_;
    std::unordered_map<std::string, std::size_t> cursor_;
    std::set<std::pair<std::string, std::string>> answered_;  // (task, annotator)
    std::vector<Annotation> log_;
    std::FILE* out_ = nullptr;
    Clock clock_;
    std::size_t replay_skipped_ = 0;
};

void write_tasks(const std::filesystem::path& path, const std::vector<ReviewTask>& tasks);
std::vector<ReviewTask> load_tasks(const std::filesystem::path& path);

/// UTC timestamp, e.g. 2024-01-01T00:00:00Z.
std::string utc_now();

}  // namespace xforge::review
