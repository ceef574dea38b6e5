#include "xforge/review.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>

#include "xforge/log.hpp"
#include "xforge/numeric.hpp"
#include "xforge/random.hpp"

namespace xforge::review {

std::string_view to_string(TaskKind k) { return k == TaskKind::quality ? "quality" : "preference"; }
std::string_view to_string(Permutation p) { return p == Permutation::ab ? "ab" : "ba"; }

std::string_view to_string(Choice c) {
    switch (c) {
        case Choice::left: return "left";
        case Choice::right: return "right";
        case Choice::tie: return "tie";
    }
    return "tie";
}

std::string_view to_string(Winner w) {
    switch (w) {
        case Winner::model_a: return "model_a";
        case Winner::model_b: return "model_b";
        case Winner::tie: return "tie";
    }
    return "tie";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "quality") return TaskKind::quality;
    if (s == "preference") return TaskKind::preference;
    throw ValidationError("unknown task kind '" + std::string(s) + "'");
}

Choice choice_from_string(std::string_view s) {
    if (s == "left") return Choice::left;
    if (s == "right") return Choice::right;
    if (s == "tie") return Choice::tie;
    throw ValidationError("preference answer must be left, right or tie, got '" + std::string(s) + "'");
}

Winner derandomize(Choice c, Permutation p) {
    if (c == Choice::tie) return Winner::tie;
    const bool a_on_left = p == Permutation::ab;
    return (c == Choice::left) == a_on_left ? Winner::model_a : Winner::model_b;
}

Choice permute(Winner w, Permutation p) {
    if (w == Winner::tie) return Choice::tie;
    const bool a_on_left = p == Permutation::ab;
    return (w == Winner::model_a) == a_on_left ? Choice::left : Choice::right;
}

// ---------------------------------------------------------------------------
// Tasks

void ReviewTask::validate() const {
    if (task_id.empty()) throw ValidationError("task has an empty id");
    if (kind == TaskKind::quality && (!quality || preference))
        throw ValidationError("task " + task_id + ": quality task needs exactly a quality payload");
    if (kind == TaskKind::preference && (!preference || quality))
        throw ValidationError("task " + task_id + ": preference task needs exactly a preference payload");
}

void to_json(json& j, const ReviewTask& t) {
    j = json{{"task_id", t.task_id}, {"kind", to_string(t.kind)}};
    if (t.quality) {
        const auto& q = *t.quality;
        j["payload"] = {{"instruction_en", q.instruction_en},
                        {"text", q.text},
                        {"lang", q.lang},
                        {"sample_id", q.sample_id}};
    } else if (t.preference) {
        const auto& p = *t.preference;
        j["payload"] = {{"prompt", p.prompt},
                        {"lang", p.lang},
                        {"answer_left", p.answer_left},
                        {"answer_right", p.answer_right},
                        {"permutation", to_string(p.permutation)},
                        {"model_a", p.model_a},
                        {"model_b", p.model_b}};
    }
}

void from_json(const json& j, ReviewTask& t) {
    t.task_id = j.at("task_id").get<std::string>();
    t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    const auto& p = j.at("payload");
    t.quality.reset();
    t.preference.reset();
    if (t.kind == TaskKind::quality) {
        t.quality = QualityPayload{p.at("instruction_en").get<std::string>(), p.at("text").get<std::string>(),
                                   p.at("lang").get<LanguageCode>(), p.value("sample_id", std::string{})};
    } else {
        const auto perm = p.at("permutation").get<std::string>();
        if (perm != "ab" && perm != "ba") throw ValidationError("task " + t.task_id + ": bad permutation");
        t.preference = PreferencePayload{p.at("prompt").get<std::string>(),
                                         p.at("lang").get<LanguageCode>(),
                                         p.at("answer_left").get<std::string>(),
                                         p.at("answer_right").get<std::string>(),
                                         perm == "ab" ? Permutation::ab : Permutation::ba,
                                         p.at("model_a").get<std::string>(),
                                         p.at("model_b").get<std::string>()};
    }
    t.validate();
}

json blinded_view(const ReviewTask& t) {
    json j{{"task_id", t.task_id}, {"kind", to_string(t.kind)}};
    if (t.quality) {
        j["payload"] = {{"instruction_en", t.quality->instruction_en},
                        {"text", t.quality->text},
                        {"lang", t.quality->lang}};
        j["direction"] = t.quality->lang.right_to_left() ? "rtl" : "ltr";
    } else if (t.preference) {
        j["payload"] = {{"prompt", t.preference->prompt},
                        {"lang", t.preference->lang},
                        {"answer_left", t.preference->answer_left},
                        {"answer_right", t.preference->answer_right}};
        j["direction"] = t.preference->lang.right_to_left() ? "rtl" : "ltr";
    }
    return j;
}

ReviewTask make_quality_task(std::string task_id, QualityPayload payload) {
    ReviewTask t;
    t.task_id = std::move(task_id);
    t.kind = TaskKind::quality;
    t.quality = std::move(payload);
    return t;
}

std::vector<ReviewTask> make_preference_tasks(const std::vector<PreferenceItem>& items,
                                              const std::string& model_a, const std::string& model_b,
                                              std::uint64_t rng_seed) {
    std::vector<ReviewTask> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        ReviewTask t;
        t.task_id = "pref-" + item.prompt_id;
        t.kind = TaskKind::preference;
        Rng rng(derive_seed(rng_seed, t.task_id));
        const auto perm = rng.bernoulli(0.5) ? Permutation::ba : Permutation::ab;
        const bool a_left = perm == Permutation::ab;
        t.preference = PreferencePayload{item.prompt,
                                         item.lang,
                                         a_left ? item.answer_a : item.answer_b,
                                         a_left ? item.answer_b : item.answer_a,
                                         perm,
                                         model_a,
                                         model_b};
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Annotations

namespace {

bool yes_no(const json& v, const char* field) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "yes") return true;
        if (s == "no") return false;
    }
    throw ValidationError(std::string(field) + " must be yes or no");
}

}  // namespace

void to_json(json& j, const Annotation& a) {
    j = json{{"task_id", a.task_id}, {"annotator_id", a.annotator_id}, {"kind", to_string(a.kind)}};
    if (a.quality)
        j["answer"] = {{"valid_task", a.quality->valid_task ? "yes" : "no"},
                       {"acceptable_response", a.quality->acceptable_response ? "yes" : "no"}};
    if (a.choice) j["answer"] = to_string(*a.choice);
    if (a.winner) j["winner"] = to_string(*a.winner);
    j["submitted_at"] = a.submitted_at;
}

void from_json(const json& j, Annotation& a) {
    if (!j.is_object()) throw ValidationError("annotation must be a JSON object");
    if (!j.contains("task_id") || !j["task_id"].is_string()) throw ValidationError("missing task_id");
    if (!j.contains("annotator_id") || !j["annotator_id"].is_string())
        throw ValidationError("missing annotator_id");
    if (!j.contains("answer")) throw ValidationError("missing answer");
    a.task_id = j["task_id"].get<std::string>();
    a.annotator_id = j["annotator_id"].get<std::string>();
    a.quality.reset();
    a.choice.reset();
    a.winner.reset();
    const auto& ans = j["answer"];
    if (ans.is_object()) {
        a.kind = TaskKind::quality;
        if (!ans.contains("valid_task") || !ans.contains("acceptable_response"))
            throw ValidationError("quality answer needs valid_task and acceptable_response");
        a.quality = QualityAnswer{yes_no(ans["valid_task"], "valid_task"),
                                  yes_no(ans["acceptable_response"], "acceptable_response")};
    } else if (ans.is_string()) {
        a.kind = TaskKind::preference;
        a.choice = choice_from_string(ans.get<std::string>());
    } else {
        throw ValidationError("answer must be an object or a string");
    }
    if (j.contains("kind") && task_kind_from_string(j["kind"].get<std::string>()) != a.kind)
        throw ValidationError("answer does not match the declared kind");
    a.submitted_at = j.value("submitted_at", std::string{});
}

// ---------------------------------------------------------------------------
// Store

double YesRate::pct() const { return percent_1dp(yes, total); }

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ReviewStore::ReviewStore(std::vector<ReviewTask> tasks, std::optional<std::filesystem::path> log_path,
                         Clock clock)
    : tasks_(std::move(tasks)), clock_(clock ? std::move(clock) : Clock(utc_now)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        tasks_[i].validate();
        if (!index_.emplace(tasks_[i].task_id, i).second)
            throw ValidationError("duplicate task id " + tasks_[i].task_id);
    }
    if (!log_path) return;

    if (std::filesystem::exists(*log_path)) {
        read_jsonl(*log_path, [&](const json& rec) {
            try {
                Annotation a = rec.get<Annotation>();
                accept_locked(std::move(a));
            } catch (const std::exception& e) {
                ++replay_skipped_;
                log::warn("review log: skipping record: " + std::string(e.what()));
            }
            return true;
        });
    }
    out_ = std::fopen(log_path->c_str(), "a");
    if (!out_) throw std::runtime_error("cannot open annotation log " + log_path->string());
}

ReviewStore::~ReviewStore() {
    if (out_) std::fclose(out_);
}

std::unique_ptr<ReviewStore> ReviewStore::open(const std::filesystem::path& tasks_path,
                                               const std::filesystem::path& log_path, Clock clock) {
    return std::make_unique<ReviewStore>(load_tasks(tasks_path), log_path, std::move(clock));
}

void ReviewStore::register_annotator(const std::string& id) {
    if (id.empty()) throw ValidationError("annotator id is empty");
    std::lock_guard lock(mu_);
    annotators_.insert(id);
}

bool ReviewStore::is_registered(const std::string& id) const {
    std::lock_guard lock(mu_);
    return annotators_.count(id) > 0;
}

std::optional<ReviewTask> ReviewStore::next_task(const std::string& annotator_id) {
    std::lock_guard lock(mu_);
    if (!annotators_.count(annotator_id)) throw AuthError("unknown annotator '" + annotator_id + "'");
    const std::size_t n = tasks_.size();
    auto& cursor = cursor_[annotator_id];
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t i = (cursor + step) % n;
        if (answered_.count({tasks_[i].task_id, annotator_id})) continue;
        cursor = (i + 1) % n;
        return tasks_[i];
    }
    return std::nullopt;
}

Annotation ReviewStore::accept_locked(Annotation a) {
    const auto it = index_.find(a.task_id);
    if (it == index_.end()) throw NotFoundError("unknown task '" + a.task_id + "'");
    const auto& task = tasks_[it->second];
    if (task.kind != a.kind)
        throw ValidationError("task " + a.task_id + " is a " + std::string(to_string(task.kind)) +
                              " task but the answer is for a " + std::string(to_string(a.kind)) + " task");
    if (answered_.count({a.task_id, a.annotator_id}))
        throw ConflictError("annotator '" + a.annotator_id + "' already answered task '" + a.task_id + "'");
    if (a.kind == TaskKind::preference) a.winner = derandomize(*a.choice, task.preference->permutation);
    answered_.insert({a.task_id, a.annotator_id});
    log_.push_back(a);
    return a;
}

void ReviewStore::append(const Annotation& a) {
    if (!out_) return;
    const std::string line = json(a).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), out_) != line.size() || std::fflush(out_) != 0 ||
        ::fsync(fileno(out_)) != 0)
        throw std::runtime_error("failed to persist annotation for task " + a.task_id);
}

Annotation ReviewStore::submit(Annotation a) {
    std::lock_guard lock(mu_);
    if (!annotators_.count(a.annotator_id)) throw AuthError("unknown annotator '" + a.annotator_id + "'");
    a.submitted_at = clock_();
    auto stored = accept_locked(std::move(a));
    try {
        append(stored);
    } catch (...) {
        answered_.erase({stored.task_id, stored.annotator_id});
        log_.pop_back();
        throw;
    }
    return stored;
}

std::size_t ReviewStore::annotation_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

std::vector<Annotation> ReviewStore::annotations() const {
    std::lock_guard lock(mu_);
    return log_;
}

Summary ReviewStore::summarize() const {
    std::lock_guard lock(mu_);
    if (log_.empty()) throw NotFoundError("no annotations yet");
    Summary s;
    s.annotations = log_.size();
    std::set<std::string> who;
    std::unordered_map<std::string, std::size_t> per_task;
    for (const auto& a : log_) {
        who.insert(a.annotator_id);
        ++per_task[a.task_id];
        const auto& task = tasks_[index_.at(a.task_id)];
        if (a.quality) {
            auto& lang = s.quality_by_lang[task.quality->lang.code()];
            for (auto* rate : {&s.valid_task, &lang.first}) {
                ++rate->total;
                if (a.quality->valid_task) ++rate->yes;
            }
            for (auto* rate : {&s.acceptable_response, &lang.second}) {
                ++rate->total;
                if (a.quality->acceptable_response) ++rate->yes;
            }
        } else {
            const auto& p = *task.preference;
            auto& c = s.preference[p.model_a + " vs " + p.model_b];
            switch (*a.winner) {
                case Winner::model_a: ++c.model_a; break;
                case Winner::model_b: ++c.model_b; break;
                case Winner::tie: ++c.tie; break;
            }
        }
    }
    s.annotators = who.size();
    for (const auto& [id, n] : per_task) {
        const auto kind = tasks_[index_.at(id)].kind;
        const auto target = kind == TaskKind::quality ? kDefaultQualityAnnotators : kDefaultPreferenceAnnotators;
        if (n >= target) ++s.fully_covered_tasks;
    }
    return s;
}

namespace {

json rate_json(const YesRate& r) {
    json j{{"yes", r.yes}, {"total", r.total}};
    j["yes_pct"] = r.total ? json(r.pct()) : json(nullptr);
    return j;
}

}  // namespace

void to_json(json& j, const Summary& s) {
    j = json{{"annotations", s.annotations},
             {"annotators", s.annotators},
             {"fully_covered_tasks", s.fully_covered_tasks}};
    j["quality"] = {{"valid_task", rate_json(s.valid_task)},
                    {"acceptable_response", rate_json(s.acceptable_response)},
                    {"by_lang", json::object()}};
    for (const auto& [lang, rates] : s.quality_by_lang)
        j["quality"]["by_lang"][lang] = {{"valid_task", rate_json(rates.first)},
                                         {"acceptable_response", rate_json(rates.second)}};
    j["preference"] = json::object();
    for (const auto& [pair, c] : s.preference) {
        json e{{"model_a", c.model_a}, {"model_b", c.model_b}, {"tie", c.tie}, {"total", c.total()}};
        e["tie_pct"] = c.total() ? json(percent_1dp(c.tie, c.total())) : json(nullptr);
        j["preference"][pair] = e;
    }
}

void write_tasks(const std::filesystem::path& path, const std::vector<ReviewTask>& tasks) {
    write_jsonl(path, to_json_records(tasks));
}

std::vector<ReviewTask> load_tasks(const std::filesystem::path& path) {
    return from_json_records<ReviewTask>(load_jsonl(path));
}

}  // namespace xforge::review
