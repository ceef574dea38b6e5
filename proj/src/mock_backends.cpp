#include "xforge/mock_backends.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

#include "xforge/hash.hpp"
#include "xforge/random.hpp"
#include "xforge/text.hpp"

namespace xforge::mock {

std::string_view extract_between(std::string_view s, std::string_view open, std::string_view close) {
    const auto a = s.find(open);
    if (a == std::string_view::npos) return {};
    const auto start = a + open.size();
    const auto b = s.find(close, start);
    if (b == std::string_view::npos) return {};
    return s.substr(start, b - start);
}

std::string EchoModel::complete(const InferenceRequest& req) {
    ++calls_;
    const auto words = text::split_words(req.user_prompt);
    std::string out = "INSTR:";
    for (std::size_t i = 0; i < words.size() && i < 5; ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

std::string FunctionModel::complete(const InferenceRequest& req) {
    ++calls_;
    return fn_(req);
}

std::string FlakyModel::complete(const InferenceRequest& req) {
    const auto n = ++calls_;
    if (n <= failures_) {
        if (over_limit_) throw backends::OverLimitError("scripted over-limit #" + std::to_string(n));
        throw backends::TransientError("scripted failure #" + std::to_string(n));
    }
    return inner_->complete(req);
}

// ---------------------------------------------------------------------------

std::string mock_instruction_for(std::string_view response) {
    static constexpr std::array<std::string_view, 12> kVerbs = {
        "Write", "Explain", "Describe", "Summarize", "Give", "Create",
        "Provide", "Compose", "Outline", "Draft", "Prepare", "Share"};
    static constexpr std::array<std::string_view, 12> kObjects = {
        "story", "article", "summary", "overview", "list", "poem",
        "essay", "guide", "recipe", "review", "report", "letter"};
    static constexpr std::array<std::string_view, 10> kTopics = {
        "the history of the city",   "local football results", "a traditional dish",
        "the new government policy", "a popular festival",     "healthy eating",
        "mobile phone prices",       "the school exam schedule", "tourism in the region",
        "a famous singer"};
    const std::uint64_t h = hash64(response);
    const auto verb = kVerbs[h % kVerbs.size()];
    const auto object = kObjects[(h >> 16) % kObjects.size()];
    const auto topic = kTopics[(h >> 32) % kTopics.size()];
    const char* article = std::string_view("aeiou").find(object.front()) != std::string_view::npos ? " an " : " a ";
    return std::string(verb) + article + std::string(object) + " about " + std::string(topic) + ".";
}

std::string InstructionGeneratorModel::complete(const InferenceRequest& req) {
    const auto& response = req.user_prompt;
    if (response.find("[[empty]]") != std::string::npos) return "";
    if (response.find("[[nonlatin]]") != std::string::npos)
        return "इस लेख का सारांश "
               "लिखिए";
    return mock_instruction_for(response);
}

std::string HashEvaluatorModel::complete(const InferenceRequest& req) {
    const double u = static_cast<double>(hash64(req.user_prompt) >> 11) * (1.0 / 9007199254740992.0);
    if (u < p2_) return "2";
    if (u < p2_ + p1_) return "1";
    return "0";
}

std::string SimulatedEvaluatorModel::complete(const InferenceRequest& req) {
    const auto instruction =
        std::string(extract_between(req.user_prompt, "Instruction:\n", "\n\nResponse:\n"));
    const auto it = truth_->find(instruction);
    if (it == truth_->end()) return "0";
    Rng rng(derive_seed(seed_, req.user_prompt));
    if (rng.bernoulli(agreement_)) return std::to_string(it->second);
    std::array<int, 2> others{};
    std::size_t n = 0;
    for (int level = 0; level <= 2; ++level)
        if (level != it->second) others[n++] = level;
    return std::to_string(others[rng.index(2)]);
}

std::string FollowerModel::complete(const InferenceRequest& req) {
    return "[follower] " + std::string(text::trim(req.user_prompt));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kOpen1 = "[The Start of Assistant 1's Answer]\n";
constexpr std::string_view kClose1 = "\n[The End of Assistant 1's Answer]";
constexpr std::string_view kOpen2 = "[The Start of Assistant 2's Answer]\n";
constexpr std::string_view kClose2 = "\n[The End of Assistant 2's Answer]";

std::string format_score(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::string PositionBiasedJudgeModel::complete(const InferenceRequest&) {
    return "7 6\nAssistant 1 gave the better answer.";
}

std::string ContentJudgeModel::complete(const InferenceRequest& req) {
    const auto a1 = extract_between(req.user_prompt, kOpen1, kClose1);
    const auto a2 = extract_between(req.user_prompt, kOpen2, kClose2);
    return format_score(score_(a1)) + " " + format_score(score_(a2)) + "\nScored by content.";
}

// ---------------------------------------------------------------------------

EmbeddingVector hash_embedding(std::string_view body, std::size_t dim) {
    EmbeddingVector v(dim, 0.0);
    for (auto word : text::split_words(text::to_lower_ascii(body))) {
        while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) word.pop_back();
        if (word.empty()) continue;
        const std::uint64_t h = hash64(word);
        v[h % dim] += (h >> 63) ? 1.0 : -1.0;
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    if (norm > 0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<EmbeddingVector> HashEmbeddingModel::embed_batch(const std::vector<std::string>& texts) {
    ++batches_;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t, dim_));
    return out;
}

std::string PrefixTranslationModel::translate(const std::string& body, const LanguageCode&,
                                              const LanguageCode& dst) {
    return "[" + dst.code() + "] " + body;
}

// ---------------------------------------------------------------------------

backends::Registry make_mock_registry(const MockStackOptions& opts,
                                      std::shared_ptr<backends::ResponseCache> cache) {
    using backends::ChatClient;
    backends::ClientPolicy policy;
    policy.max_in_flight = opts.max_in_flight;
    policy.force_cache = true;
    if (!cache) cache = std::make_shared<backends::ResponseCache>();

    backends::Registry reg;
    reg.add_chat(std::make_shared<ChatClient>(
        names::kGenerator, std::make_shared<InstructionGeneratorModel>(), policy, cache));
    reg.add_chat(std::make_shared<ChatClient>(
        names::kEvaluator,
        std::make_shared<HashEvaluatorModel>(opts.evaluator_p2, opts.evaluator_p1), policy, cache));
    reg.add_chat(std::make_shared<ChatClient>(names::kFollower, std::make_shared<FollowerModel>(),
                                              policy, cache));
    reg.add_chat(std::make_shared<ChatClient>(names::kJudge,
                                              std::make_shared<PositionBiasedJudgeModel>(), policy,
                                              cache));
    reg.add_embedding(std::make_shared<backends::EmbeddingClient>(
        names::kEmbedder, std::make_shared<HashEmbeddingModel>(opts.embedding_dim),
        opts.embedding_dim, policy));
    reg.add_translation(names::kTranslator,
                        std::make_shared<backends::TranslationClient>(
                            names::kTranslator, std::make_shared<PrefixTranslationModel>()));
    return reg;
}

}  // namespace xforge::mock
