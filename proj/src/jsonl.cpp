#include "xforge/jsonl.hpp"

#include <fstream>
#include <istream>

#include "xforge/text.hpp"

namespace xforge {

namespace fs = std::filesystem;

JsonlReadStats read_jsonl(std::istream& in, const std::function<bool(const json&)>& on_record) {
    JsonlReadStats stats;
    std::string line;
    std::size_t offset = 0;
    while (true) {
        if (!std::getline(in, line)) {
            if (in.bad()) throw InputError("read failure", offset);
            break;
        }
        ++offset;
        if (text::trim(line).empty()) continue;
        ++stats.records;
        json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (rec.is_discarded()) {
            ++stats.malformed;
            continue;
        }
        if (!on_record(rec)) break;
    }
    return stats;
}

JsonlReadStats read_jsonl(const fs::path& path, const std::function<bool(const json&)>& on_record) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string(), 0);
    return read_jsonl(in, on_record);
}

std::vector<json> load_jsonl(const fs::path& path) {
    std::vector<json> out;
    const auto stats = read_jsonl(path, [&](const json& r) {
        out.push_back(r);
        return true;
    });
    if (stats.malformed > 0)
        throw InputError(path.string() + ": " + std::to_string(stats.malformed) + " malformed lines",
                         0);
    return out;
}

namespace {

void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        body(out);
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
    atomic_write(path, [&](std::ostream& out) {
        for (const auto& r : records) out << r.dump() << '\n';
    });
}

void write_json(const fs::path& path, const json& doc) {
    atomic_write(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string(), 0);
    return json::parse(in);
}

}  // namespace xforge
