#include "xforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <stdexcept>

#include "xforge/corpus.hpp"
#include "xforge/diversify.hpp"
#include "xforge/generation.hpp"
#include "xforge/hash.hpp"
#include "xforge/log.hpp"
#include "xforge/mock_backends.hpp"
#include "xforge/random.hpp"
#include "xforge/refinement.hpp"
#include "xforge/seed.hpp"
#include "xforge/stats.hpp"

namespace xforge::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"lang", c.lang},
             {"corpus", c.corpus.string()},
             {"native_seed", c.native_seed.string()},
             {"translated_seed", c.translated_seed.string()},
             {"work_dir", c.work_dir.string()},
             {"corpus_limit", c.corpus_limit},
             {"len_min", c.len_min},
             {"len_max", c.len_max},
             {"seed_tuning_size", c.seed_tuning_size},
             {"iterations", c.iterations},
             {"promotion_cap", c.promotion_cap},
             {"kmeans_k", c.kmeans_k},
             {"final_total", c.final_total},
             {"kmeans_max_iter", c.kmeans_max_iter},
             {"kmeans_restarts", c.kmeans_restarts},
             {"kmeans_tol", c.kmeans_tol},
             {"normalize_embeddings", c.normalize_embeddings},
             {"sampling",
              {{"top_p", c.sampling.top_p},
               {"temperature", c.sampling.temperature},
               {"max_new", c.sampling.max_new}}},
             {"backends", c.backends},
             {"roles",
              {{"generator", c.roles.generator},
               {"evaluator", c.roles.evaluator},
               {"follower", c.roles.follower},
               {"embedder", c.roles.embedder}}},
             {"rng_seed", c.rng_seed},
             {"workers", c.workers}};
    j["response_cache"] = c.response_cache ? json(c.response_cache->string()) : json(nullptr);
}

void from_json(const json& j, PipelineConfig& c) {
    static const std::set<std::string> known = {
        "lang",          "corpus",          "native_seed",     "translated_seed", "work_dir",
        "corpus_limit",  "len_min",         "len_max",         "seed_tuning_size", "iterations",
        "promotion_cap", "kmeans_k",        "final_total",     "kmeans_max_iter", "kmeans_restarts",
        "kmeans_tol",    "normalize_embeddings", "sampling",   "backends",        "roles",
        "rng_seed",      "workers",         "response_cache"};
    if (!j.is_object()) throw backends::ConfigurationError("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw backends::ConfigurationError("config: unknown key '" + key + "'");

    PipelineConfig d;
    c.lang = j.value("lang", d.lang);
    c.corpus = j.value("corpus", std::string{});
    c.native_seed = j.value("native_seed", std::string{});
    c.translated_seed = j.value("translated_seed", std::string{});
    c.work_dir = j.value("work_dir", d.work_dir.string());
    c.corpus_limit = j.value("corpus_limit", d.corpus_limit);
    c.len_min = j.value("len_min", d.len_min);
    c.len_max = j.value("len_max", d.len_max);
    c.seed_tuning_size = j.value("seed_tuning_size", d.seed_tuning_size);
    c.iterations = j.value("iterations", d.iterations);
    c.promotion_cap = j.value("promotion_cap", d.promotion_cap);
    c.kmeans_k = j.value("kmeans_k", d.kmeans_k);
    c.final_total = j.value("final_total", d.final_total);
    c.kmeans_max_iter = j.value("kmeans_max_iter", d.kmeans_max_iter);
    c.kmeans_restarts = j.value("kmeans_restarts", d.kmeans_restarts);
    c.kmeans_tol = j.value("kmeans_tol", d.kmeans_tol);
    c.normalize_embeddings = j.value("normalize_embeddings", d.normalize_embeddings);
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        c.sampling.top_p = s.value("top_p", d.sampling.top_p);
        c.sampling.temperature = s.value("temperature", d.sampling.temperature);
        c.sampling.max_new = s.value("max_new", d.sampling.max_new);
    }
    c.backends = j.value("backends", std::vector<backends::BackendSpec>{});
    if (j.contains("roles")) {
        const auto& r = j["roles"];
        c.roles.generator = r.value("generator", d.roles.generator);
        c.roles.evaluator = r.value("evaluator", d.roles.evaluator);
        c.roles.follower = r.value("follower", d.roles.follower);
        c.roles.embedder = r.value("embedder", d.roles.embedder);
    }
    c.rng_seed = j.value("rng_seed", d.rng_seed);
    c.workers = j.value("workers", d.workers);
    c.response_cache.reset();
    if (j.contains("response_cache") && j["response_cache"].is_string())
        c.response_cache = j["response_cache"].get<std::string>();

    if (c.len_min > c.len_max) throw backends::ConfigurationError("config: len_min > len_max");
    if (c.iterations < 1) throw backends::ConfigurationError("config: iterations must be >= 1");
    if (c.corpus_limit < 1) throw backends::ConfigurationError("config: corpus_limit must be >= 1");
    if (c.kmeans_k < 1) throw backends::ConfigurationError("config: kmeans_k must be >= 1");
    c.sampling.max_new = std::max(1, c.sampling.max_new);
}

PipelineConfig load_config(const fs::path& path) {
    auto c = load_json(path).get<PipelineConfig>();
    const auto base = path.parent_path();
    auto resolve = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    resolve(c.corpus);
    resolve(c.native_seed);
    resolve(c.translated_seed);
    resolve(c.work_dir);
    if (c.response_cache) resolve(*c.response_cache);
    return c;
}

void use_mock_roles(PipelineConfig& c) {
    c.roles.generator = mock::names::kGenerator;
    c.roles.evaluator = mock::names::kEvaluator;
    c.roles.follower = mock::names::kFollower;
    c.roles.embedder = mock::names::kEmbedder;
}

std::string role_for_iteration(const std::string& role, int k) {
    std::string out = role;
    const std::string token = "{k}";
    for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token))
        out.replace(pos, token.size(), std::to_string(k));
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view to_string(StageStatus s) {
    switch (s) {
        case StageStatus::pending: return "pending";
        case StageStatus::completed: return "completed";
        case StageStatus::paused: return "paused";
        case StageStatus::failed: return "failed";
    }
    return "pending";
}

namespace {

StageStatus status_from_string(const std::string& s) {
    if (s == "completed") return StageStatus::completed;
    if (s == "paused") return StageStatus::paused;
    if (s == "failed") return StageStatus::failed;
    return StageStatus::pending;
}

}  // namespace

const StageRecord* Manifest::stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

std::map<std::string, std::string> Manifest::digests() const {
    std::map<std::string, std::string> out;
    for (const auto& s : stages)
        if (s.status == StageStatus::completed) out[s.name] = s.digest;
    return out;
}

void to_json(json& j, const Manifest& m) {
    j = json{{"status", to_string(m.status)}, {"config", m.config}, {"config_digest", m.config_digest}};
    j["paused_at_iteration"] = m.paused_at_iteration ? json(*m.paused_at_iteration) : json(nullptr);
    j["stages"] = json::array();
    for (const auto& s : m.stages) {
        json e{{"name", s.name},       {"status", to_string(s.status)}, {"outputs", s.outputs},
               {"digest", s.digest},   {"counts", s.counts},            {"elapsed_ms", s.elapsed_ms},
               {"reused", s.reused}};
        if (!s.error.empty()) e["error"] = s.error;
        j["stages"].push_back(std::move(e));
    }
}

void from_json(const json& j, Manifest& m) {
    m.status = status_from_string(j.at("status").get<std::string>());
    m.config = j.at("config");
    m.config_digest = j.at("config_digest").get<std::string>();
    m.paused_at_iteration.reset();
    if (j.contains("paused_at_iteration") && !j["paused_at_iteration"].is_null())
        m.paused_at_iteration = j["paused_at_iteration"].get<int>();
    m.stages.clear();
    for (const auto& e : j.at("stages")) {
        StageRecord s;
        s.name = e.at("name").get<std::string>();
        s.status = status_from_string(e.at("status").get<std::string>());
        s.outputs = e.at("outputs").get<std::map<std::string, std::string>>();
        s.digest = e.at("digest").get<std::string>();
        s.counts = e.at("counts");
        s.elapsed_ms = e.at("elapsed_ms").get<double>();
        s.reused = e.value("reused", false);
        s.error = e.value("error", std::string{});
        m.stages.push_back(std::move(s));
    }
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct StageOutcome {
    std::vector<std::string> outputs;
    json counts = json::object();
    bool paused = false;
    std::optional<int> paused_at;
};

class Runner {
public:
    Runner(const PipelineConfig& c, backends::Registry& r) : cfg_(c), reg_(r), dir_(c.work_dir) {}

    fs::path path(const std::string& name) const { return dir_ / name; }

    StageOutcome ingest() {
        if (cfg_.corpus.empty()) throw backends::ConfigurationError("config: corpus path is not set");
        const auto result = corpus::ingest(cfg_.corpus, cfg_.lang, cfg_.corpus_limit,
                                           corpus::LengthBounds{cfg_.len_min, cfg_.len_max});
        corpus::write_documents(path("documents.jsonl"), result.documents);
        return {{"documents.jsonl"}, json(result.stats)};
    }

    StageOutcome seed() {
        std::vector<seed::NativeTurn> native;
        std::vector<seed::TranslatedPair> translated;
        if (!cfg_.native_seed.empty()) native = seed::load_native(cfg_.native_seed);
        if (!cfg_.translated_seed.empty()) translated = seed::load_translated(cfg_.translated_seed);
        const auto built = seed::build_seed(native, translated, cfg_.lang);
        const auto split =
            seed::split_seed(built.samples, cfg_.seed_tuning_size, derive_seed(cfg_.rng_seed, "seed"));
        write_samples(path("seed.jsonl"), built.samples);
        write_samples(path("seed_tuning.jsonl"), split.tuning);
        write_samples(path("seed_rating.jsonl"), split.rating_source);
        return {{"seed.jsonl", "seed_tuning.jsonl", "seed_rating.jsonl"},
                json{{"native", native.size()},
                     {"translated", translated.size()},
                     {"skipped_native", built.skipped_native},
                     {"seed", built.samples.size()},
                     {"tuning", split.tuning.size()},
                     {"rating_source", split.rating_source.size()}}};
    }

    StageOutcome gen_export() {
        const auto records = generation::export_generator_train(load_samples(path("seed.jsonl")));
        generation::write_records(path("generator_train.jsonl"), records);
        return {{"generator_train.jsonl"}, json{{"records", records.size()}}};
    }

    StageOutcome candidates() {
        const auto docs = corpus::load_documents(path("documents.jsonl"));
        generation::GenerationOptions opts;
        opts.sampling = cfg_.sampling;
        opts.workers = cfg_.workers;
        const auto result = generation::generate_candidates(docs, *reg_.chat(cfg_.roles.generator), opts);
        generation::write_candidates(path("candidates.jsonl"), result.candidates);
        using generation::DropReason;
        return {{"candidates.jsonl"},
                json{{"documents", docs.size()},
                     {"candidates", result.candidates.size()},
                     {"dropped_empty", result.dropped_for(DropReason::empty_instruction)},
                     {"dropped_not_english", result.dropped_for(DropReason::not_english)},
                     {"dropped_backend", result.dropped_for(DropReason::backend_failure)}}};
    }

    StageOutcome refinement() {
        const auto docs = corpus::load_documents(path("documents.jsonl"));
        const auto cands = generation::load_candidates(path("candidates.jsonl"));
        const auto tuning = load_samples(path("seed_tuning.jsonl"));
        const auto rating = load_samples(path("seed_rating.jsonl"));

        refinement::RefinementConfig rc;
        rc.iterations = cfg_.iterations;
        rc.promotion_cap = cfg_.promotion_cap;
        rc.rng_seed = derive_seed(cfg_.rng_seed, "refinement");
        rc.workers = cfg_.workers;
        rc.synthesis.workers = cfg_.workers;

        refinement::IterationModels models;
        models.evaluator = [this](int k) -> std::shared_ptr<backends::ChatClient> {
            const auto name = role_for_iteration(cfg_.roles.evaluator, k);
            return reg_.has_chat(name) ? reg_.chat(name) : nullptr;
        };
        models.follower = [this](int k) -> std::shared_ptr<backends::ChatClient> {
            if (cfg_.roles.follower.empty()) return nullptr;
            const auto name = role_for_iteration(cfg_.roles.follower, k);
            return reg_.has_chat(name) ? reg_.chat(name) : nullptr;
        };

        const auto result = refinement::run_refinement(docs, cands, tuning, rating, rc, models, path("refinement"));
        StageOutcome out;
        json iterations = json::array();
        for (const auto& it : result.iterations) {
            json s = it;
            s.erase("mined_doc_ids");
            s["mined"] = it.mined_doc_ids.size();
            s["resumed"] = it.resumed;
            iterations.push_back(std::move(s));
        }
        out.counts["iterations"] = iterations;
        if (result.status == refinement::RunStatus::paused) {
            out.paused = true;
            out.paused_at = result.paused_at;
            out.counts["paused_at_iteration"] = result.paused_at;
            return out;
        }
        const auto promoted = result.promoted();
        write_samples(path("promoted.jsonl"), promoted);
        generation::write_candidates(path("rated_candidates.jsonl"), result.candidates);
        out.outputs = {"promoted.jsonl", "rated_candidates.jsonl"};
        out.counts["candidates"] = cands.size();
        out.counts["promoted"] = promoted.size();
        return out;
    }

    StageOutcome diversify() {
        const auto pool = load_samples(path("promoted.jsonl"));
        if (cfg_.final_total > pool.size())
            throw std::invalid_argument("diversify: final_total " + std::to_string(cfg_.final_total) +
                                        " exceeds the " + std::to_string(pool.size()) + " promoted samples");
        diversify::DiversifyOptions opts;
        opts.k = cfg_.kmeans_k;
        opts.total = cfg_.final_total;
        opts.rng_seed = derive_seed(cfg_.rng_seed, "diversify");
        opts.normalize = cfg_.normalize_embeddings;
        opts.kmeans.max_iter = cfg_.kmeans_max_iter;
        opts.kmeans.tol = cfg_.kmeans_tol;
        opts.kmeans.restarts = cfg_.kmeans_restarts;
        opts.kmeans.workers = cfg_.workers;

        diversify::EmbeddingCache cache(path("embeddings.jsonl"));
        const auto result = diversify::diversify(pool, *reg_.embedding(cfg_.roles.embedder), cache, opts);
        write_samples(path("final.jsonl"), result.selected);
        write_json(path("clusters.json"), json{{"k", result.model.k},
                                               {"inertia", result.model.inertia},
                                               {"iterations_run", result.model.iterations_run},
                                               {"inertia_trace", result.model.inertia_trace},
                                               {"cluster_sizes", result.model.cluster_sizes()},
                                               {"per_cluster", result.per_cluster}});
        const auto [lo, hi] = std::minmax_element(result.per_cluster.begin(), result.per_cluster.end());
        return {{"final.jsonl", "clusters.json"},
                json{{"pool", pool.size()},
                     {"k", opts.k},
                     {"selected", result.selected.size()},
                     {"per_cluster_min", *lo},
                     {"per_cluster_max", *hi},
                     {"iterations_run", result.model.iterations_run}}};
    }

    StageOutcome stats() {
        const auto final_set = load_samples(path("final.jsonl"));
        std::vector<std::string> instructions;
        for (const auto& s : final_set) instructions.push_back(s.instruction_en);
        const auto verbs = stats::verb_noun_stats(instructions);
        write_json(path("stats.json"), stats::stats_document(final_set, verbs));
        const auto table = stats::format_length_table(stats::per_language(final_set));
        std::ofstream(path("stats.txt"), std::ios::binary | std::ios::trunc) << table;
        const auto lengths = stats::length_stats(final_set);
        return {{"stats.json", "stats.txt"},
                json{{"samples", final_set.size()},
                     {"instruction_mean", lengths.instruction.mean},
                     {"output_mean", lengths.output.mean},
                     {"no_verb_noun", verbs.no_extraction}}};
    }

    StageOutcome run(const std::string& name) {
        if (name == "ingest") return ingest();
        if (name == "seed") return seed();
        if (name == "gen_export") return gen_export();
        if (name == "candidates") return candidates();
        if (name == "refinement") return refinement();
        if (name == "diversify") return diversify();
        return stats();
    }

private:
    const PipelineConfig& cfg_;
    backends::Registry& reg_;
    fs::path dir_;
};

std::string stage_digest(const std::string& name, const std::map<std::string, std::string>& outputs) {
    Sha256 h;
    h.update(name);
    for (const auto& [file, sha] : outputs) {
        h.update("\n" + file + " " + sha);
    }
    return h.hex_digest();
}

bool outputs_intact(const fs::path& dir, const StageRecord& s) {
    for (const auto& [file, sha] : s.outputs)
        if (!fs::exists(dir / file) || sha256_file(dir / file) != sha) return false;
    return true;
}

std::string config_digest(const PipelineConfig& c) {
    json j = c;
    // Neither affects outputs.
    j.erase("workers");
    j.erase("work_dir");
    return sha256_hex(j.dump());
}

}  // namespace

Manifest run_all(const PipelineConfig& config, backends::Registry& registry) {
    fs::create_directories(config.work_dir);
    const auto manifest_path = config.work_dir / "manifest.json";

    Manifest previous;
    bool have_previous = false;
    if (fs::exists(manifest_path)) {
        try {
            previous = load_json(manifest_path).get<Manifest>();
            have_previous = true;
        } catch (const std::exception& e) {
            log::warn("pipeline: ignoring unreadable manifest: " + std::string(e.what()));
        }
    }

    Manifest m;
    m.config = config;
    m.config_digest = config_digest(config);
    for (const auto* name : kStages) m.stages.push_back(StageRecord{name});
    const bool same_config = have_previous && previous.config_digest == m.config_digest;

    Runner runner(config, registry);
    bool chain_reused = same_config;
    m.status = StageStatus::completed;
    for (auto& stage : m.stages) {
        if (chain_reused) {
            const auto* old = previous.stage(stage.name);
            if (old && old->status == StageStatus::completed && outputs_intact(config.work_dir, *old)) {
                stage = *old;
                stage.reused = true;
                log::info("pipeline: " + stage.name + " reused");
                continue;
            }
            chain_reused = false;
        }

        log::info("pipeline: " + stage.name + " started");
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto outcome = runner.run(stage.name);
            stage.counts = std::move(outcome.counts);
            if (outcome.paused) {
                stage.status = StageStatus::paused;
                m.status = StageStatus::paused;
                m.paused_at_iteration = outcome.paused_at;
            } else {
                for (const auto& file : outcome.outputs)
                    stage.outputs[file] = sha256_file(config.work_dir / file);
                stage.digest = stage_digest(stage.name, stage.outputs);
                stage.status = StageStatus::completed;
            }
        } catch (const std::exception& e) {
            stage.status = StageStatus::failed;
            stage.error = e.what();
            m.status = StageStatus::failed;
            log::error("pipeline: " + stage.name + " failed: " + e.what());
        }
        stage.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        write_json(manifest_path, m);
        if (stage.status != StageStatus::completed) break;
        log::info("pipeline: " + stage.name + " completed");
    }
    write_json(manifest_path, m);
    return m;
}

}  // namespace xforge::pipeline
