#include "xforge/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "xforge/random.hpp"
#include "xforge/text.hpp"

namespace xforge::stats {

LengthStats describe(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("describe: no values");
    double mean = 0, m2 = 0;
    std::size_t n = 0;
    for (double x : values) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    return {mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(n))), n};
}

SampleLengths length_stats(const std::vector<XSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("length_stats: no samples");
    std::vector<double> instr, out;
    instr.reserve(samples.size());
    out.reserve(samples.size());
    for (const auto& s : samples) {
        instr.push_back(static_cast<double>(text::scalar_count(s.instruction_en)));
        out.push_back(static_cast<double>(text::scalar_count(s.output)));
    }
    return {describe(instr), describe(out)};
}

void to_json(json& j, const LengthStats& s) { j = json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

void to_json(json& j, const SampleLengths& s) {
    j = json{{"instruction", s.instruction}, {"output", s.output}};
}

// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& imperative_verbs() {
    static const std::unordered_set<std::string> verbs = {
        "add",       "analyze",   "analyse",  "answer",    "arrange",   "ask",       "brainstorm",
        "build",     "calculate", "categorize", "change",  "check",     "choose",    "classify",
        "combine",   "compare",   "compile",  "complete",  "compose",   "compute",   "construct",
        "convert",   "correct",   "count",    "create",    "define",    "delete",    "describe",
        "design",    "detect",    "determine", "develop",  "discuss",   "draft",     "draw",
        "edit",      "estimate",  "evaluate", "explain",   "extract",   "fill",      "find",
        "fix",       "format",    "generate", "give",      "guess",     "help",      "identify",
        "imagine",   "improve",   "include",  "invent",    "list",      "make",      "match",
        "mention",   "name",      "organize", "outline",   "paraphrase", "plan",     "predict",
        "prepare",   "present",   "produce",  "propose",   "provide",   "rank",      "rate",
        "read",      "recommend", "reply",    "report",    "respond",   "restate",   "review",
        "rewrite",   "say",       "select",   "share",     "show",      "solve",     "sort",
        "state",     "suggest",   "summarize", "summarise", "tell",     "translate", "turn",
        "use",       "verify",    "write"};
    return verbs;
}

const std::unordered_set<std::string>& skip_words() {
    static const std::unordered_set<std::string> words = {
        "a",     "an",    "the",   "me",    "us",     "him",    "her",   "them",  "my",    "our",
        "your",  "their", "his",   "its",   "some",   "any",    "this",  "that",  "these", "those",
        "one",   "two",   "three", "four",  "five",   "several", "few",  "many",  "more",  "short",
        "brief", "long",  "new",   "simple", "detailed", "good", "quick", "small", "big",  "best",
        "each",  "all",   "every", "other", "another", "few",   "up",    "out",   "down",  "to",
        "for",   "of",    "in",    "on",    "with",   "about",  "and",   "or",    "i",     "you",
        "it",    "we",    "they",  "how",   "what",   "why",    "who",   "which", "when",  "where",
        "whether", "if",  "is",    "are",   "be",     "very",   "most",  "much",  "following",
        "given", "above", "below"};
    return words;
}

std::string clean_word(std::string w) {
    w = text::to_lower_ascii(w);
    auto is_letter = [](unsigned char c) { return std::isalpha(c) || c >= 0x80 || c == '-' || c == '\''; };
    while (!w.empty() && !is_letter(static_cast<unsigned char>(w.back()))) w.pop_back();
    std::size_t start = 0;
    while (start < w.size() && !is_letter(static_cast<unsigned char>(w[start]))) ++start;
    return w.substr(start);
}

std::string singular(std::string noun) {
    const auto n = noun.size();
    if (n > 4 && noun.compare(n - 3, 3, "ies") == 0) return noun.substr(0, n - 3) + "y";
    if (n > 3 && noun.back() == 's' && noun[n - 2] != 's' && noun[n - 2] != 'u' && noun[n - 2] != 'i')
        noun.pop_back();
    return noun;
}

bool is_alpha_word(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
        return std::isalpha(c) || c == '-' || c == '\'';
    });
}

}  // namespace

std::optional<VerbNoun> rule_based_extract(std::string_view instruction) {
    std::vector<std::string> words;
    for (auto& w : text::split_words(instruction)) {
        auto c = clean_word(w);
        if (!c.empty()) words.push_back(std::move(c));
    }
    std::size_t i = 0;
    if (i < words.size() && words[i] == "please") ++i;
    if (i >= words.size() || !imperative_verbs().count(words[i])) return std::nullopt;
    const std::string verb = words[i] == "summarise" ? "summarize" : words[i] == "analyse" ? "analyze" : words[i];
    for (++i; i < words.size(); ++i) {
        if (skip_words().count(words[i]) || !is_alpha_word(words[i])) continue;
        return VerbNoun{verb, singular(words[i])};
    }
    return std::nullopt;
}

VerbNounReport verb_noun_stats(const std::vector<std::string>& instructions, const VerbNounExtractor& extractor,
                               std::size_t top_verbs, std::size_t top_nouns) {
    std::map<std::string, std::map<std::string, std::size_t>> table;
    std::map<std::string, std::size_t> verb_counts;
    VerbNounReport r;
    for (const auto& instr : instructions) {
        const auto vn = extractor(instr);
        if (!vn || vn->verb.empty() || vn->noun.empty()) {
            ++r.no_extraction;
            continue;
        }
        ++r.extracted;
        ++verb_counts[vn->verb];
        ++table[vn->verb][vn->noun];
    }

    std::vector<std::pair<std::string, std::size_t>> ranked(verb_counts.begin(), verb_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > top_verbs) ranked.resize(top_verbs);

    for (const auto& [verb, count] : ranked) {
        VerbEntry e{verb, count, {}};
        for (const auto& [noun, c] : table[verb]) e.nouns.push_back({verb, noun, c});
        std::stable_sort(e.nouns.begin(), e.nouns.end(),
                         [](const auto& a, const auto& b) { return a.count > b.count; });
        if (e.nouns.size() > top_nouns) e.nouns.resize(top_nouns);
        r.verbs.push_back(std::move(e));
    }
    return r;
}

void to_json(json& j, const VerbNounReport& r) {
    j = json{{"extracted", r.extracted}, {"no_extraction", r.no_extraction}, {"verbs", json::array()}};
    for (const auto& v : r.verbs) {
        json nouns = json::array();
        for (const auto& n : v.nouns) nouns.push_back({{"noun", n.noun}, {"count", n.count}});
        j["verbs"].push_back({{"verb", v.verb}, {"count", v.count}, {"nouns", nouns}});
    }
}

// ---------------------------------------------------------------------------

std::vector<review::ReviewTask> review_sample(const std::vector<XSample>& samples, std::size_t per_lang,
                                              std::uint64_t rng_seed) {
    std::map<LanguageCode, std::vector<std::size_t>> by_lang;
    for (std::size_t i = 0; i < samples.size(); ++i) by_lang[samples[i].lang].push_back(i);

    std::vector<review::ReviewTask> out;
    if (per_lang == 0) return out;
    for (const auto& [lang, members] : by_lang) {
        if (members.size() < per_lang)
            throw std::invalid_argument("review_sample: language " + lang.code() + " has " +
                                        std::to_string(members.size()) + " samples, fewer than " +
                                        std::to_string(per_lang));
        Rng rng(derive_seed(rng_seed, lang.code()));
        auto picks = rng.sample_indices(members.size(), per_lang);
        std::sort(picks.begin(), picks.end());
        for (auto p : picks) {
            const auto& s = samples[members[p]];
            out.push_back(review::make_quality_task("quality-" + s.id,
                                                    {s.instruction_en, s.output, s.lang, s.id}));
        }
    }
    return out;
}

std::vector<LanguageStats> per_language(const std::vector<XSample>& samples) {
    std::map<LanguageCode, std::vector<XSample>> by_lang;
    for (const auto& s : samples) by_lang[s.lang].push_back(s);
    std::vector<LanguageStats> rows;
    for (const auto& [lang, group] : by_lang) rows.push_back({lang, length_stats(group)});
    return rows;
}

std::string format_length_table(const std::vector<LanguageStats>& rows) {
    auto cell = [](const LengthStats& s) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(1) << s.mean << "±" << s.std;
        return os.str();
    };
    std::ostringstream os;
    os << std::left << std::setw(10) << "Language" << std::setw(22) << "Instruction Length"
       << "Output Length\n";
    for (const auto& r : rows) {
        const auto instr = cell(r.lengths.instruction);
        // setw counts bytes; pad by hand around the two-byte ± sign.
        os << std::left << std::setw(10) << r.lang.code() << instr
           << std::string(instr.size() < 23 ? 23 - instr.size() : 1, ' ') << cell(r.lengths.output) << "\n";
    }
    return os.str();
}

json stats_document(const std::vector<XSample>& samples, const VerbNounReport& verbs) {
    json j;
    j["samples"] = samples.size();
    j["std_kind"] = "population";
    j["length_unit"] = "unicode scalar values";
    j["languages"] = json::array();
    for (const auto& row : per_language(samples))
        j["languages"].push_back({{"lang", row.lang}, {"n", row.lengths.instruction.n},
                                  {"instruction", row.lengths.instruction}, {"output", row.lengths.output}});
    j["verb_noun"] = verbs;
    return j;
}

}  // namespace xforge::stats
