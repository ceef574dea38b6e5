#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xforge/backends.hpp"
#include "xforge/corpus.hpp"
#include "xforge/sample.hpp"

namespace xforge::generation {

enum class Purpose { instr_generator, x_follower, evaluator };

std::string_view to_string(Purpose p);

/// One chat-format fine-tuning example (system, user, assistant).
struct FineTuneRecord {
    std::string id;
    std::string system;
    std::string user;
    std::string assistant;
    Purpose purpose = Purpose::instr_generator;
};

/// Wire form: {"id": ..., "messages": [{role, content} x 3]}.
void to_json(json& j, const FineTuneRecord& r);
void from_json(const json& j, FineTuneRecord& r);

void write_records(const std::filesystem::path& path, const std::vector<FineTuneRecord>& records);

/// Response-to-instruction examples: the target-language output is the
/// prompt, the English instruction is the completion. One record per sample.
std::vector<FineTuneRecord> export_generator_train(const std::vector<XSample>& seed);

/// Prompt used to ask the tuned generator for an instruction.
backends::InferenceRequest generator_request(const LanguageCode& lang, std::string_view response,
                                             const backends::Sampling& sampling);

struct GenMeta {
    std::string backend;
    backends::Sampling sampling;
    std::string template_version;
};

/// A generated English instruction paired with a corpus document.
struct Candidate {
    std::string doc_id;
    LanguageCode lang;
    std::string instruction_en;
    GenMeta gen_meta;
    std::map<int, int> rating_history;
};

void to_json(json& j, const Candidate& c);
void from_json(const json& j, Candidate& c);

void write_candidates(const std::filesystem::path& path, const std::vector<Candidate>& cands);
std::vector<Candidate> load_candidates(const std::filesystem::path& path);

using EnglishClassifier = std::function<bool(std::string_view)>;

/// Script plus function-word heuristic: at least 90% of letters are ASCII
/// Latin and either a common English word appears or the text is very short.
bool looks_english(std::string_view s);

struct GenerationOptions {
    backends::Sampling sampling{0.9, 0.7, 128};
    EnglishClassifier is_english = looks_english;
    /// 0 means use the client's max_in_flight.
    std::size_t workers = 0;
};

enum class DropReason { empty_instruction, not_english, backend_failure };

std::string_view to_string(DropReason r);

struct Dropped {
    std::string doc_id;
    DropReason reason;
};

struct GenerationResult {
    std::vector<Candidate> candidates;
    std::vector<Dropped> dropped;

    std::size_t dropped_for(DropReason r) const;
};

/// One candidate per document whose generated instruction is non-empty and
/// classified as English. Output follows document order.
GenerationResult generate_candidates(const std::vector<corpus::Document>& docs,
                                     backends::ChatClient& generator,
                                     const GenerationOptions& opts = {});

}  // namespace xforge::generation
