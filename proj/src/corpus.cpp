#include "xforge/corpus.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "xforge/hash.hpp"
#include "xforge/text.hpp"

namespace xforge::corpus {

std::string document_id(const LanguageCode& lang, std::string_view body) {
    std::string keyed = lang.code();
    keyed.push_back('\0');
    keyed.append(body);
    return sha256_hex(keyed).substr(0, 32);
}

Document Document::make(const LanguageCode& lang, std::string_view body, std::string source) {
    const auto trimmed = text::trim(body);
    if (text::normalize_whitespace(trimmed).empty())
        throw std::invalid_argument("document text is empty");
    Document d;
    d.lang = lang;
    d.text = std::string(trimmed);
    d.char_len = text::scalar_count(d.text);
    d.id = document_id(lang, d.text);
    d.source = std::move(source);
    return d;
}

void to_json(json& j, const Document& d) {
    j = json{{"id", d.id},
             {"lang", d.lang},
             {"text", d.text},
             {"char_len", d.char_len},
             {"source", d.source}};
}

void from_json(const json& j, Document& d) {
    d.lang = j.at("lang").get<LanguageCode>();
    d.text = j.at("text").get<std::string>();
    d.char_len = text::scalar_count(d.text);
    d.id = j.contains("id") ? j.at("id").get<std::string>() : document_id(d.lang, d.text);
    d.source = j.value("source", std::string{});
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::empty: return "empty";
        case RejectReason::too_short: return "too_short";
        case RejectReason::too_long: return "too_long";
    }
    return "none";
}

FilterDecision filter(std::string_view body, const LengthBounds& bounds) {
    FilterDecision d;
    d.char_len = text::scalar_count(body);
    if (text::normalize_whitespace(body).empty()) {
        d.reason = RejectReason::empty;
    } else if (d.char_len < bounds.min_chars) {
        d.reason = RejectReason::too_short;
    } else if (d.char_len > bounds.max_chars) {
        d.reason = RejectReason::too_long;
    } else {
        d.accepted = true;
    }
    return d;
}

void to_json(json& j, const IngestStats& s) {
    j = json{{"records", s.records},     {"malformed", s.malformed}, {"empty", s.empty},
             {"too_short", s.too_short}, {"too_long", s.too_long},   {"duplicates", s.duplicates},
             {"emitted", s.emitted}};
}

IngestResult ingest(std::istream& in, const LanguageCode& lang, std::size_t limit,
                    std::string_view source_name, const LengthBounds& bounds) {
    if (limit < 1) throw std::invalid_argument("ingest: limit must be >= 1");
    IngestResult result;
    auto& st = result.stats;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;

    const auto raw = read_jsonl(in, [&](const json& rec) {
        ++line_no;
        if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
            ++st.malformed;
            return true;
        }
        const auto body = text::trim(rec["text"].get_ref<const std::string&>());
        const auto decision = filter(body, bounds);
        if (!decision.accepted) {
            switch (decision.reason) {
                case RejectReason::empty: ++st.empty; break;
                case RejectReason::too_short: ++st.too_short; break;
                case RejectReason::too_long: ++st.too_long; break;
                case RejectReason::none: break;
            }
            return true;
        }
        std::string source;
        if (rec.contains("url") && rec["url"].is_string())
            source = rec["url"].get<std::string>();
        else
            source = std::string(source_name) + ":" + std::to_string(line_no);
        auto doc = Document::make(lang, body, std::move(source));
        if (!seen.insert(doc.id).second) {
            ++st.duplicates;
            return true;
        }
        result.documents.push_back(std::move(doc));
        return result.documents.size() < limit;
    });
    st.records = raw.records;
    st.malformed += raw.malformed;
    st.emitted = result.documents.size();
    return result;
}

IngestResult ingest(const std::filesystem::path& path, const LanguageCode& lang, std::size_t limit,
                    const LengthBounds& bounds) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string(), 0);
    return ingest(in, lang, limit, path.filename().string(), bounds);
}

DocumentIndex::DocumentIndex(const std::vector<Document>& docs) {
    by_id_.reserve(docs.size());
    for (const auto& d : docs) by_id_.emplace(d.id, &d);
}

const Document* DocumentIndex::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
}

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs) {
    write_jsonl(path, to_json_records(docs));
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
    return from_json_records<Document>(load_jsonl(path));
}

}  // namespace xforge::corpus
