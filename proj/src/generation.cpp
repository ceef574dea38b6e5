#include "xforge/generation.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <unordered_set>

#include "xforge/log.hpp"
#include "xforge/parallel.hpp"
#include "xforge/templates.hpp"
#include "xforge/text.hpp"

namespace xforge::generation {

std::string_view to_string(Purpose p) {
    switch (p) {
        case Purpose::instr_generator: return "instr_generator";
        case Purpose::x_follower: return "x_follower";
        case Purpose::evaluator: return "evaluator";
    }
    return "instr_generator";
}

void to_json(json& j, const FineTuneRecord& r) {
    j = json{{"id", r.id},
             {"messages",
              json::array({json{{"role", "system"}, {"content", r.system}},
                           json{{"role", "user"}, {"content", r.user}},
                           json{{"role", "assistant"}, {"content", r.assistant}}})}};
}

void from_json(const json& j, FineTuneRecord& r) {
    r.id = j.value("id", std::string{});
    for (const auto& m : j.at("messages")) {
        const auto role = m.at("role").get<std::string>();
        const auto content = m.at("content").get<std::string>();
        if (role == "system")
            r.system = content;
        else if (role == "user")
            r.user = content;
        else if (role == "assistant")
            r.assistant = content;
    }
}

void write_records(const std::filesystem::path& path, const std::vector<FineTuneRecord>& records) {
    write_jsonl(path, to_json_records(records));
}

std::vector<FineTuneRecord> export_generator_train(const std::vector<XSample>& seed) {
    if (seed.empty()) throw std::invalid_argument("export_generator_train: empty seed");
    std::vector<FineTuneRecord> out;
    out.reserve(seed.size());
    for (const auto& s : seed) {
        FineTuneRecord r;
        r.id = s.id;
        r.system = templates::with_language(templates::kInstructionGeneratorSystem, s.lang);
        r.user = text::render(templates::kInstructionGeneratorUser, {{"response", s.output}});
        r.assistant = s.instruction_en;
        r.purpose = Purpose::instr_generator;
        out.push_back(std::move(r));
    }
    return out;
}

backends::InferenceRequest generator_request(const LanguageCode& lang, std::string_view response,
                                             const backends::Sampling& sampling) {
    backends::InferenceRequest req;
    req.system_prompt = templates::with_language(templates::kInstructionGeneratorSystem, lang);
    req.user_prompt =
        text::render(templates::kInstructionGeneratorUser, {{"response", std::string(response)}});
    req.sampling = sampling;
    return req;
}

void to_json(json& j, const Candidate& c) {
    json history = json::object();
    for (const auto& [k, v] : c.rating_history) history[std::to_string(k)] = v;
    j = json{{"doc_id", c.doc_id},
             {"lang", c.lang},
             {"instruction_en", c.instruction_en},
             {"gen_meta",
              {{"backend", c.gen_meta.backend},
               {"top_p", c.gen_meta.sampling.top_p},
               {"temperature", c.gen_meta.sampling.temperature},
               {"max_new", c.gen_meta.sampling.max_new},
               {"template_version", c.gen_meta.template_version}}},
             {"rating_history", history}};
}

void from_json(const json& j, Candidate& c) {
    c.doc_id = j.at("doc_id").get<std::string>();
    c.lang = j.at("lang").get<LanguageCode>();
    c.instruction_en = j.at("instruction_en").get<std::string>();
    const auto& meta = j.at("gen_meta");
    c.gen_meta.backend = meta.value("backend", std::string{});
    c.gen_meta.sampling.top_p = meta.value("top_p", 0.9);
    c.gen_meta.sampling.temperature = meta.value("temperature", 0.7);
    c.gen_meta.sampling.max_new = meta.value("max_new", 128);
    c.gen_meta.template_version = meta.value("template_version", std::string{});
    c.rating_history.clear();
    if (j.contains("rating_history"))
        for (const auto& [k, v] : j["rating_history"].items()) c.rating_history[std::stoi(k)] = v.get<int>();
}

void write_candidates(const std::filesystem::path& path, const std::vector<Candidate>& cands) {
    write_jsonl(path, to_json_records(cands));
}

std::vector<Candidate> load_candidates(const std::filesystem::path& path) {
    return from_json_records<Candidate>(load_jsonl(path));
}

bool looks_english(std::string_view s) {
    static const std::unordered_set<std::string> kFunctionWords = {
        "the", "an", "of", "to", "in", "for", "and", "or", "is", "are", "what", "how",
        "why", "which", "who", "about", "this", "that", "with", "on", "me", "your", "you",
        "please", "write", "explain", "describe", "give", "list", "tell", "summarize",
        "provide", "create", "make", "can", "do", "does", "my", "from", "it"};

    std::size_t ascii_letters = 0;
    std::size_t other_letters = 0;
    for (char32_t cp : text::decode_utf8(s)) {
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) {
            ++ascii_letters;
        } else if (cp >= 0xC0 && !(cp >= 0x2000 && cp <= 0x206F) && !(cp >= 0x3000 && cp <= 0x303F) &&
                   cp != 0xFFFD && cp != 0xD7 && cp != 0xF7) {
            // Treat every non-ASCII code point outside punctuation blocks as a letter.
            ++other_letters;
        }
    }
    if (ascii_letters == 0) return false;
    if (static_cast<double>(ascii_letters) < 0.9 * static_cast<double>(ascii_letters + other_letters))
        return false;

    const auto words = text::split_words(text::to_lower_ascii(s));
    if (words.size() <= 3) return true;
    for (auto w : words) {
        while (!w.empty() && !std::isalpha(static_cast<unsigned char>(w.back()))) w.pop_back();
        while (!w.empty() && !std::isalpha(static_cast<unsigned char>(w.front()))) w.erase(w.begin());
        if (kFunctionWords.count(w)) return true;
    }
    return false;
}

std::string_view to_string(DropReason r) {
    switch (r) {
        case DropReason::empty_instruction: return "empty_instruction";
        case DropReason::not_english: return "not_english";
        case DropReason::backend_failure: return "backend_failure";
    }
    return "backend_failure";
}

std::size_t GenerationResult::dropped_for(DropReason r) const {
    return static_cast<std::size_t>(std::count_if(dropped.begin(), dropped.end(),
                                                  [&](const Dropped& d) { return d.reason == r; }));
}

GenerationResult generate_candidates(const std::vector<corpus::Document>& docs,
                                     backends::ChatClient& generator,
                                     const GenerationOptions& opts) {
    struct Slot {
        std::optional<Candidate> cand;
        std::optional<DropReason> drop;
    };
    std::vector<Slot> slots(docs.size());
    const std::size_t workers = opts.workers ? opts.workers : generator.policy().max_in_flight;

    parallel_for(docs.size(), workers, [&](std::size_t i) {
        const auto& doc = docs[i];
        std::string instruction;
        try {
            instruction = generator.complete(generator_request(doc.lang, doc.text, opts.sampling));
        } catch (const backends::BackendError& e) {
            log::warn("generation: skipping document " + doc.id + ": " + e.what());
            slots[i].drop = DropReason::backend_failure;
            return;
        }
        instruction = std::string(text::trim(instruction));
        if (instruction.empty()) {
            slots[i].drop = DropReason::empty_instruction;
            return;
        }
        if (!opts.is_english(instruction)) {
            slots[i].drop = DropReason::not_english;
            return;
        }
        Candidate c;
        c.doc_id = doc.id;
        c.lang = doc.lang;
        c.instruction_en = std::move(instruction);
        c.gen_meta = GenMeta{generator.id(), opts.sampling,
                             std::string(templates::kInstructionGeneratorVersion)};
        slots[i].cand = std::move(c);
    });

    GenerationResult result;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].cand)
            result.candidates.push_back(std::move(*slots[i].cand));
        else
            result.dropped.push_back({docs[i].id, *slots[i].drop});
    }
    return result;
}

}  // namespace xforge::generation
