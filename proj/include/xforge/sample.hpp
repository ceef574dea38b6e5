#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"

namespace xforge {

enum class Origin { seed_native, seed_translated, mined };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

/// Cross-lingual instruction sample: English instruction, target-language output.
struct XSample {
    std::string id;
    std::string instruction_en;
    std::string output;
    LanguageCode lang;
    Origin origin = Origin::seed_native;
    std::optional<int> rating;
    std::optional<int> iteration_found;

    bool is_seed() const { return origin != Origin::mined; }

    /// Throws std::invalid_argument when any invariant is violated.
    void validate() const;
};

XSample make_seed_sample(std::string id, std::string instruction_en, std::string output,
                         const LanguageCode& lang, Origin origin);
XSample make_mined_sample(std::string id, std::string instruction_en, std::string output,
                          const LanguageCode& lang, int rating, int iteration_found);

void to_json(json& j, const XSample& s);
void from_json(const json& j, XSample& s);

void write_samples(const std::filesystem::path& path, const std::vector<XSample>& samples);
std::vector<XSample> load_samples(const std::filesystem::path& path);

}  // namespace xforge
