#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"

namespace xforge::corpus {

/// One web text that may serve as a target-language response.
struct Document {
    std::string id;
    LanguageCode lang;
    std::string text;
    std::size_t char_len = 0;
    std::string source;

    /// Builds a document, deriving id and char_len. Throws if text is blank.
    static Document make(const LanguageCode& lang, std::string_view text, std::string source);
};

std::string document_id(const LanguageCode& lang, std::string_view text);

void to_json(json& j, const Document& d);
void from_json(const json& j, Document& d);

struct LengthBounds {
    std::size_t min_chars = 64;
    std::size_t max_chars = 2048;
};

enum class RejectReason { none, empty, too_short, too_long };

std::string_view to_string(RejectReason r);

struct FilterDecision {
    bool accepted = false;
    RejectReason reason = RejectReason::none;
    std::size_t char_len = 0;
};

/// Length gate on unicode scalar count, inclusive on both bounds.
FilterDecision filter(std::string_view text, const LengthBounds& bounds = {});

struct IngestStats {
    std::size_t records = 0;
    std::size_t malformed = 0;
    std::size_t empty = 0;
    std::size_t too_short = 0;
    std::size_t too_long = 0;
    std::size_t duplicates = 0;
    std::size_t emitted = 0;
};

void to_json(json& j, const IngestStats& s);

struct IngestResult {
    std::vector<Document> documents;
    IngestStats stats;
};

/// Reads {text, url?} records, keeping the first `limit` distinct survivors
/// in input order. A record without a string `text` is skipped as malformed.
IngestResult ingest(std::istream& in, const LanguageCode& lang, std::size_t limit,
                    std::string_view source_name = "stdin", const LengthBounds& bounds = {});
IngestResult ingest(const std::filesystem::path& path, const LanguageCode& lang,
                    std::size_t limit, const LengthBounds& bounds = {});

/// Id-keyed view over a document list. The list must outlive the index.
class DocumentIndex {
public:
    DocumentIndex() = default;
    explicit DocumentIndex(const std::vector<Document>& docs);
    const Document* find(const std::string& id) const;
    std::size_t size() const { return by_id_.size(); }

private:
    std::unordered_map<std::string, const Document*> by_id_;
};

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> load_documents(const std::filesystem::path& path);

}  // namespace xforge::corpus
