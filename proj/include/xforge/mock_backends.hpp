#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xforge/backends.hpp"

// Deterministic in-process stand-ins for every external model. They never
// touch the network and their outputs depend only on the request contents.
namespace xforge::mock {

using backends::EmbeddingVector;
using backends::InferenceRequest;

/// Replies "INSTR:" followed by the first five words of the user prompt.
class EchoModel : public backends::ChatModel {
public:
    std::string complete(const InferenceRequest& req) override;
    std::size_t calls() const { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

/// Wraps an arbitrary function.
class FunctionModel : public backends::ChatModel {
public:
    explicit FunctionModel(std::function<std::string(const InferenceRequest&)> fn)
        : fn_(std::move(fn)) {}
    std::string complete(const InferenceRequest& req) override;
    std::size_t calls() const { return calls_.load(); }

private:
    std::function<std::string(const InferenceRequest&)> fn_;
    std::atomic<std::size_t> calls_{0};
};

/// Throws TransientError (or OverLimitError) for the first `failures` calls,
/// then delegates.
class FlakyModel : public backends::ChatModel {
public:
    FlakyModel(std::size_t failures, std::shared_ptr<backends::ChatModel> inner,
               bool over_limit = false)
        : failures_(failures), inner_(std::move(inner)), over_limit_(over_limit) {}
    std::string complete(const InferenceRequest& req) override;
    std::size_t calls() const { return calls_.load(); }

private:
    std::size_t failures_;
    std::shared_ptr<backends::ChatModel> inner_;
    bool over_limit_;
    std::atomic<std::size_t> calls_{0};
};

/// Instruction generator stand-in. Builds an English imperative from hashed
/// choices of verb, object and topic. Responses containing "[[empty]]" yield
/// an empty reply; responses containing "[[nonlatin]]" yield Devanagari text.
class InstructionGeneratorModel : public backends::ChatModel {
public:
    std::string complete(const InferenceRequest& req) override;
};

/// Deterministic instruction for a response text (what the mock generator emits).
std::string mock_instruction_for(std::string_view response);

/// Evaluator stand-in rating by hash of the prompt: "2" with probability p2,
/// "1" with probability p1, else "0".
class HashEvaluatorModel : public backends::ChatModel {
public:
    HashEvaluatorModel(double p2 = 0.5, double p1 = 0.25) : p2_(p2), p1_(p1) {}
    std::string complete(const InferenceRequest& req) override;

private:
    double p2_;
    double p1_;
};

/// Evaluator that knows a hidden true quality per instruction and reports it
/// with probability `agreement`, otherwise one of the two other levels
/// uniformly. Draws are seeded by (seed, prompt) so repeated calls agree.
class SimulatedEvaluatorModel : public backends::ChatModel {
public:
    SimulatedEvaluatorModel(std::shared_ptr<const std::unordered_map<std::string, int>> truth,
                            double agreement, std::uint64_t seed)
        : truth_(std::move(truth)), agreement_(agreement), seed_(seed) {}
    std::string complete(const InferenceRequest& req) override;

private:
    std::shared_ptr<const std::unordered_map<std::string, int>> truth_;
    double agreement_;
    std::uint64_t seed_;
};

/// Follower stand-in: a short target-language-tagged answer to the instruction.
class FollowerModel : public backends::ChatModel {
public:
    std::string complete(const InferenceRequest& req) override;
};

/// Judge that always scores the first-presented answer 7 and the second 6.
class PositionBiasedJudgeModel : public backends::ChatModel {
public:
    std::string complete(const InferenceRequest& req) override;
};

/// Judge that scores each presented answer with a function of its text.
class ContentJudgeModel : public backends::ChatModel {
public:
    explicit ContentJudgeModel(std::function<double(std::string_view answer)> score)
        : score_(std::move(score)) {}
    std::string complete(const InferenceRequest& req) override;

private:
    std::function<double(std::string_view)> score_;
};

/// Feature-hashing embedder: each lowercase word adds a signed unit to a
/// hashed coordinate; the result is L2-normalised.
class HashEmbeddingModel : public backends::EmbeddingModel {
public:
    explicit HashEmbeddingModel(std::size_t dim = backends::kDefaultEmbeddingDim) : dim_(dim) {}
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    std::size_t batches() const { return batches_.load(); }

private:
    std::size_t dim_;
    std::atomic<std::size_t> batches_{0};
};

EmbeddingVector hash_embedding(std::string_view text, std::size_t dim);

/// Prefixes "[<dst>] " to the text.
class PrefixTranslationModel : public backends::TranslationModel {
public:
    bool supports(const LanguageCode& src, const LanguageCode& dst) const override {
        return src != dst;
    }
    std::string translate(const std::string& text, const LanguageCode& src,
                          const LanguageCode& dst) override;
};

/// Text between two markers, or empty when either is missing.
std::string_view extract_between(std::string_view s, std::string_view open, std::string_view close);

struct MockStackOptions {
    std::size_t embedding_dim = backends::kDefaultEmbeddingDim;
    double evaluator_p2 = 0.5;
    double evaluator_p1 = 0.25;
    std::size_t max_in_flight = 4;
};

/// Names registered by make_mock_registry.
namespace names {
inline constexpr const char* kGenerator = "mock-generator";
inline constexpr const char* kEvaluator = "mock-evaluator";
inline constexpr const char* kFollower = "mock-follower";
inline constexpr const char* kEmbedder = "mock-embedder";
inline constexpr const char* kJudge = "mock-judge";
inline constexpr const char* kTranslator = "mock-translator";
}  // namespace names

backends::Registry make_mock_registry(const MockStackOptions& opts = {},
                                      std::shared_ptr<backends::ResponseCache> cache = nullptr);

}  // namespace xforge::mock
