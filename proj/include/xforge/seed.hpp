#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xforge/sample.hpp"

namespace xforge::seed {

/// First turn of a native conversation: the instruction already rendered in
/// English plus the best-rated response in the target language. An empty
/// response marks a turn that had none.
struct NativeTurn {
    std::string instruction_en;
    std::string response;
};

/// English sample whose output was machine-translated into the target language.
struct TranslatedPair {
    std::string instruction_en;
    std::string output;
};

void from_json(const json& j, NativeTurn& t);
void from_json(const json& j, TranslatedPair& t);

struct BuildResult {
    std::vector<XSample> samples;
    std::size_t skipped_native = 0;
};

/// Native turns first, then translated pairs; ids are "<lang>-seed-<n>".
BuildResult build_seed(const std::vector<NativeTurn>& native,
                       const std::vector<TranslatedPair>& translated, const LanguageCode& lang);

struct SeedSplit {
    std::vector<XSample> tuning;
    std::vector<XSample> rating_source;
};

/// Seeded uniform shuffle followed by a prefix cut of tuning_size. Both sides
/// keep the input's relative order.
SeedSplit split_seed(const std::vector<XSample>& seed, std::size_t tuning_size,
                     std::uint64_t rng_seed);

std::vector<NativeTurn> load_native(const std::filesystem::path& path);
std::vector<TranslatedPair> load_translated(const std::filesystem::path& path);

}  // namespace xforge::seed
