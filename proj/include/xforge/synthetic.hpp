#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"
#include "xforge/seed.hpp"

// Seeded stand-in data for demos and tests: pseudo-word web text in place of
// a crawl, and seed conversations with templated English instructions.
namespace xforge::synthetic {

/// Pseudo-word sentences totalling roughly `target_chars` scalars.
std::string pseudo_text(std::uint64_t seed, std::size_t target_chars);

/// A templated English instruction.
std::string english_instruction(std::uint64_t seed);

struct CorpusOptions {
    std::size_t documents = 1000;
    std::size_t min_chars = 80;
    std::size_t max_chars = 1500;
    /// Extra records that the length filter must drop (half short, half long).
    std::size_t out_of_range = 0;
    /// Extra exact repeats of earlier documents.
    std::size_t duplicates = 0;
};

/// {text, url} records; the in-range documents come first in seeded order
/// with the extras interleaved deterministically.
std::vector<json> corpus_records(const LanguageCode& lang, const CorpusOptions& opts, std::uint64_t seed);

std::vector<seed::NativeTurn> native_turns(std::size_t n, std::uint64_t seed);
std::vector<seed::TranslatedPair> translated_pairs(std::size_t n, std::uint64_t seed);

struct FixturePaths {
    std::filesystem::path corpus;
    std::filesystem::path native;
    std::filesystem::path translated;
};

/// Writes corpus.jsonl, native.jsonl and translated.jsonl into `dir`.
FixturePaths write_fixture(const std::filesystem::path& dir, const LanguageCode& lang,
                           const CorpusOptions& corpus, std::size_t native, std::size_t translated,
                           std::uint64_t seed);

}  // namespace xforge::synthetic
