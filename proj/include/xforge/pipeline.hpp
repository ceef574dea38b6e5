#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xforge/backends.hpp"
#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"

namespace xforge::pipeline {

/// Which registered backend plays each model role. `evaluator` and
/// `follower` may contain "{k}" for a per-iteration model; an empty follower
/// means no follower is served.
struct Roles {
    std::string generator = "generator";
    std::string evaluator = "evaluator-it{k}";
    std::string follower;
    std::string embedder = "embedder";
};

struct PipelineConfig {
    LanguageCode lang{"sw"};
    std::filesystem::path corpus;
    std::filesystem::path native_seed;
    std::filesystem::path translated_seed;
    std::filesystem::path work_dir = "runs";

    std::size_t corpus_limit = 1000000;
    std::size_t len_min = 64;
    std::size_t len_max = 2048;
    std::size_t seed_tuning_size = 2500;
    int iterations = 3;
    std::size_t promotion_cap = 200000;
    std::size_t kmeans_k = 1000;
    std::size_t final_total = 32000;
    std::size_t kmeans_max_iter = 100;
    std::size_t kmeans_restarts = 1;
    double kmeans_tol = 1e-6;
    bool normalize_embeddings = false;
    backends::Sampling sampling{0.9, 0.7, 128};

    std::vector<backends::BackendSpec> backends;
    Roles roles;
    /// Optional append-only response cache shared by HTTP backends.
    std::optional<std::filesystem::path> response_cache;
    std::uint64_t rng_seed = 0;
    std::size_t workers = 4;
};

/// Unknown keys are rejected. Relative paths are kept as written.
void to_json(json& j, const PipelineConfig& c);
void from_json(const json& j, PipelineConfig& c);

/// Loads a config file; relative paths resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// Points every role at the deterministic mock stack.
void use_mock_roles(PipelineConfig& c);

/// Expands "{k}" in a role name.
std::string role_for_iteration(const std::string& role, int k);

inline constexpr std::array<const char*, 7> kStages = {
    "ingest", "seed", "gen_export", "candidates", "refinement", "diversify", "stats"};

enum class StageStatus { pending, completed, paused, failed };

std::string_view to_string(StageStatus s);

struct StageRecord {
    std::string name;
    StageStatus status = StageStatus::pending;
    /// Output file name (relative to the work dir) to SHA-256.
    std::map<std::string, std::string> outputs;
    /// Digest over the stage name and its output digests.
    std::string digest;
    json counts = json::object();
    double elapsed_ms = 0;
    bool reused = false;
    std::string error;
};

struct Manifest {
    StageStatus status = StageStatus::pending;
    json config;
    std::string config_digest;
    std::vector<StageRecord> stages;
    std::optional<int> paused_at_iteration;

    const StageRecord* stage(const std::string& name) const;
    /// Stage name to digest for completed stages.
    std::map<std::string, std::string> digests() const;
};

void to_json(json& j, const Manifest& m);
void from_json(const json& j, Manifest& m);

/// Runs ingest, seed, gen_export, candidates, refinement, diversify and
/// stats in order, writing outputs and manifest.json into config.work_dir.
/// Stages already completed under the same config with intact outputs are
/// reused. A stage failure or a missing evaluator stops the run with a
/// failed or paused manifest; nothing is thrown for those.
Manifest run_all(const PipelineConfig& config, backends::Registry& registry);

}  // namespace xforge::pipeline
