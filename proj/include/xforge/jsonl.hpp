#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace xforge {

using json = nlohmann::json;

/// Thrown when an input source cannot be read at all (as opposed to a single
/// malformed record, which callers skip and count).
class InputError : public std::runtime_error {
public:
    InputError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at record offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

struct JsonlReadStats {
    std::size_t records = 0;
    std::size_t malformed = 0;
};

/// Streams a line-delimited JSON source. Blank lines are ignored; lines that
/// fail to parse are counted as malformed and skipped. The callback returns
/// false to stop early.
JsonlReadStats read_jsonl(std::istream& in, const std::function<bool(const json&)>& on_record);
JsonlReadStats read_jsonl(const std::filesystem::path& path,
                          const std::function<bool(const json&)>& on_record);

/// Loads every record of a file into memory. Malformed lines are an error.
std::vector<json> load_jsonl(const std::filesystem::path& path);

/// Writes records one per line, via a temporary file renamed into place.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

/// Writes a single JSON document (pretty-printed) atomically.
void write_json(const std::filesystem::path& path, const json& doc);
json load_json(const std::filesystem::path& path);

template <typename T>
std::vector<json> to_json_records(const std::vector<T>& items) {
    std::vector<json> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(json(item));
    return out;
}

template <typename T>
std::vector<T> from_json_records(const std::vector<json>& records) {
    std::vector<T> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.get<T>());
    return out;
}

}  // namespace xforge
