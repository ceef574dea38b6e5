#include "xforge/synthetic.hpp"

#include <array>
#include <cctype>
#include <filesystem>

#include "xforge/random.hpp"
#include "xforge/text.hpp"

namespace xforge::synthetic {

namespace {

constexpr std::array<const char*, 24> kSyllables = {
    "ka", "la", "mi", "na", "ta", "wa", "ri", "sa", "ku", "ni", "zi", "ba",
    "ha", "ji", "mo", "pa", "se", "to", "ya", "ndi", "nge", "cha", "shi", "mwa"};

std::string pseudo_word(Rng& rng) {
    std::string w;
    const std::size_t parts = 1 + rng.index(3);
    for (std::size_t i = 0; i < parts; ++i) w += kSyllables[rng.index(kSyllables.size())];
    return w;
}

std::string sentence(Rng& rng) {
    std::string s;
    const std::size_t words = 4 + rng.index(9);
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += pseudo_word(rng);
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    s += rng.bernoulli(0.1) ? "?" : ".";
    return s;
}

}  // namespace

std::string pseudo_text(std::uint64_t seed, std::size_t target_chars) {
    Rng rng(seed);
    std::string out;
    while (out.size() < target_chars) {
        if (!out.empty()) out += rng.bernoulli(0.15) ? "\n" : " ";
        out += sentence(rng);
    }
    return out;
}

std::string english_instruction(std::uint64_t seed) {
    static constexpr std::array<const char*, 10> kVerbs = {
        "Write", "Explain", "Describe", "List", "Give", "Summarize", "Suggest", "Create", "Compare", "Outline"};
    static constexpr std::array<const char*, 10> kObjects = {
        "a short story", "the main causes", "three tips", "a recipe", "the history",
        "a travel plan", "the benefits", "a poem", "the differences", "a letter"};
    static constexpr std::array<const char*, 10> kTopics = {
        "about rainy seasons", "for a small farm", "of the local market", "about mobile money",
        "for a school trip", "of clean water", "about a coastal town", "for learning a language",
        "of traditional music", "about public transport"};
    Rng rng(seed);
    return std::string(kVerbs[rng.index(kVerbs.size())]) + " " + kObjects[rng.index(kObjects.size())] + " " +
           kTopics[rng.index(kTopics.size())] + ".";
}

std::vector<json> corpus_records(const LanguageCode& lang, const CorpusOptions& opts, std::uint64_t seed) {
    if (opts.min_chars > opts.max_chars) throw std::invalid_argument("corpus_records: min_chars > max_chars");
    Rng rng(derive_seed(seed, "corpus"));
    std::vector<json> docs;
    docs.reserve(opts.documents + opts.out_of_range + opts.duplicates);
    const auto url = [&](std::size_t i) {
        return "https://example." + lang.code() + "/page/" + std::to_string(i);
    };
    for (std::size_t i = 0; i < opts.documents; ++i) {
        const std::size_t target = opts.min_chars + rng.index(opts.max_chars - opts.min_chars + 1);
        auto body = pseudo_text(rng.next(), target);
        while (text::scalar_count(body) > opts.max_chars) body.pop_back();
        while (!body.empty() && body.back() == ' ') body.pop_back();
        docs.push_back(json{{"text", body}, {"url", url(i)}});
    }
    std::vector<json> extras;
    for (std::size_t i = 0; i < opts.out_of_range; ++i) {
        const bool is_short = i % 2 == 0;
        auto body = pseudo_text(rng.next(), is_short ? 20 : 2600);
        if (is_short) body = body.substr(0, 40);
        extras.push_back(json{{"text", body}, {"url", url(opts.documents + i)}});
    }
    for (std::size_t i = 0; i < opts.duplicates && !docs.empty(); ++i) {
        json dup = docs[rng.index(docs.size())];
        dup["url"] = url(opts.documents + opts.out_of_range + i);
        extras.push_back(std::move(dup));
    }
    // Interleave extras at seeded positions so filters see them mid-stream.
    for (auto& e : extras) {
        const std::size_t at = 1 + rng.index(docs.size());
        docs.insert(docs.begin() + static_cast<long>(at), std::move(e));
    }
    return docs;
}

std::vector<seed::NativeTurn> native_turns(std::size_t n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "native"));
    std::vector<seed::NativeTurn> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({english_instruction(rng.next()), pseudo_text(rng.next(), 120 + rng.index(600))});
    return out;
}

std::vector<seed::TranslatedPair> translated_pairs(std::size_t n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "translated"));
    std::vector<seed::TranslatedPair> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({english_instruction(rng.next()), pseudo_text(rng.next(), 120 + rng.index(600))});
    return out;
}

FixturePaths write_fixture(const std::filesystem::path& dir, const LanguageCode& lang,
                           const CorpusOptions& corpus, std::size_t native, std::size_t translated,
                           std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    FixturePaths p{dir / "corpus.jsonl", dir / "native.jsonl", dir / "translated.jsonl"};
    write_jsonl(p.corpus, corpus_records(lang, corpus, seed));
    std::vector<json> rows;
    for (const auto& t : native_turns(native, seed))
        rows.push_back(json{{"instruction_en", t.instruction_en}, {"response", t.response}});
    write_jsonl(p.native, rows);
    rows.clear();
    for (const auto& t : translated_pairs(translated, seed))
        rows.push_back(json{{"instruction_en", t.instruction_en}, {"output", t.output}});
    write_jsonl(p.translated, rows);
    return p;
}

}  // namespace xforge::synthetic
