#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/review.hpp"
#include "xforge/sample.hpp"

namespace xforge::stats {

/// Mean and population standard deviation of character lengths.
struct LengthStats {
    double mean = 0;
    double std = 0;
    std::size_t n = 0;
};

struct SampleLengths {
    LengthStats instruction;
    LengthStats output;
};

/// Unicode scalar lengths of instruction_en and output. Throws on empty input.
SampleLengths length_stats(const std::vector<XSample>& samples);

/// Welford accumulation over arbitrary values. Throws on empty input.
LengthStats describe(const std::vector<double>& values);

void to_json(json& j, const LengthStats& s);
void to_json(json& j, const SampleLengths& s);

// ---------------------------------------------------------------------------
// Verb-noun structure

struct VerbNoun {
    std::string verb;
    std::string noun;
};

/// Root verb and direct object of an instruction, or empty.
using VerbNounExtractor = std::function<std::optional<VerbNoun>(std::string_view)>;

/// Imperative lexicon lookup on the first word (after "please") and the
/// first following content word as the object, both lowercased with a
/// naive plural strip on the noun.
std::optional<VerbNoun> rule_based_extract(std::string_view instruction);

struct VerbNounPair {
    std::string verb;
    std::string noun;
    std::size_t count = 0;
};

struct VerbEntry {
    std::string verb;
    std::size_t count = 0;
    std::vector<VerbNounPair> nouns;
};

struct VerbNounReport {
    std::vector<VerbEntry> verbs;
    std::size_t extracted = 0;
    std::size_t no_extraction = 0;
};

/// Top `top_verbs` verbs by frequency, each with its top `top_nouns`
/// objects. Ties rank alphabetically.
VerbNounReport verb_noun_stats(const std::vector<std::string>& instructions,
                               const VerbNounExtractor& extractor = rule_based_extract,
                               std::size_t top_verbs = 16, std::size_t top_nouns = 4);

void to_json(json& j, const VerbNounReport& r);

// ---------------------------------------------------------------------------
// Review sampling and reports

/// per_lang quality-review tasks per language present in `samples`, drawn
/// uniformly without replacement. Languages are emitted in code order.
/// Throws std::invalid_argument naming the language whose population is
/// smaller than per_lang.
std::vector<review::ReviewTask> review_sample(const std::vector<XSample>& samples, std::size_t per_lang,
                                              std::uint64_t rng_seed);

struct LanguageStats {
    LanguageCode lang;
    SampleLengths lengths;
};

/// Per-language length statistics in code order.
std::vector<LanguageStats> per_language(const std::vector<XSample>& samples);

/// Text table: Language | Instruction Length | Output Length, as mean±std.
std::string format_length_table(const std::vector<LanguageStats>& rows);

/// Machine-readable statistics document for a sample file.
json stats_document(const std::vector<XSample>& samples, const VerbNounReport& verbs);

}  // namespace xforge::stats
