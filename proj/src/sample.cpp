#include "xforge/sample.hpp"

#include <stdexcept>

#include "xforge/text.hpp"

namespace xforge {

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::seed_native: return "seed_native";
        case Origin::seed_translated: return "seed_translated";
        case Origin::mined: return "mined";
    }
    return "mined";
}

Origin origin_from_string(std::string_view s) {
    if (s == "seed_native") return Origin::seed_native;
    if (s == "seed_translated") return Origin::seed_translated;
    if (s == "mined") return Origin::mined;
    throw std::invalid_argument("unknown origin '" + std::string(s) + "'");
}

void XSample::validate() const {
    if (text::trim(instruction_en).empty())
        throw std::invalid_argument("sample " + id + ": empty instruction");
    if (text::trim(output).empty()) throw std::invalid_argument("sample " + id + ": empty output");
    if (lang.is_english())
        throw std::invalid_argument("sample " + id + ": output language must not be en");
    if (origin == Origin::mined) {
        if (!rating) throw std::invalid_argument("sample " + id + ": mined sample without rating");
        if (*rating < 0 || *rating > 2)
            throw std::invalid_argument("sample " + id + ": rating out of range");
        if (iteration_found && *iteration_found < 1)
            throw std::invalid_argument("sample " + id + ": iteration_found < 1");
    } else if (rating) {
        throw std::invalid_argument("sample " + id + ": seed sample carries a rating");
    }
}

XSample make_seed_sample(std::string id, std::string instruction_en, std::string output,
                         const LanguageCode& lang, Origin origin) {
    XSample s{std::move(id), std::move(instruction_en), std::move(output), lang, origin, {}, {}};
    s.validate();
    return s;
}

XSample make_mined_sample(std::string id, std::string instruction_en, std::string output,
                          const LanguageCode& lang, int rating, int iteration_found) {
    XSample s{std::move(id), std::move(instruction_en), std::move(output), lang, Origin::mined,
              rating, iteration_found};
    s.validate();
    return s;
}

void to_json(json& j, const XSample& s) {
    j = json{{"id", s.id},
             {"instruction_en", s.instruction_en},
             {"output", s.output},
             {"lang", s.lang},
             {"origin", to_string(s.origin)}};
    j["rating"] = s.rating ? json(*s.rating) : json(nullptr);
    j["iteration_found"] = s.iteration_found ? json(*s.iteration_found) : json(nullptr);
}

void from_json(const json& j, XSample& s) {
    s.id = j.at("id").get<std::string>();
    s.instruction_en = j.at("instruction_en").get<std::string>();
    s.output = j.at("output").get<std::string>();
    s.lang = j.at("lang").get<LanguageCode>();
    s.origin = origin_from_string(j.at("origin").get<std::string>());
    s.rating.reset();
    s.iteration_found.reset();
    if (j.contains("rating") && !j["rating"].is_null()) s.rating = j["rating"].get<int>();
    if (j.contains("iteration_found") && !j["iteration_found"].is_null())
        s.iteration_found = j["iteration_found"].get<int>();
    s.validate();
}

void write_samples(const std::filesystem::path& path, const std::vector<XSample>& samples) {
    write_jsonl(path, to_json_records(samples));
}

std::vector<XSample> load_samples(const std::filesystem::path& path) {
    return from_json_records<XSample>(load_jsonl(path));
}

}  // namespace xforge
