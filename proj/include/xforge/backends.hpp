#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"

namespace xforge::backends {

// ---------------------------------------------------------------------------
// Requests

struct Sampling {
    double top_p = 0.9;
    double temperature = 0.7;
    int max_new = 512;
};

struct InferenceRequest {
    std::string system_prompt;
    std::string user_prompt;
    Sampling sampling;

    void validate() const;
};

/// Key-sorted JSON form used for cache keys and the chat wire body.
json canonical(const InferenceRequest& req);

/// Digest of backend id plus canonical request.
std::string cache_key(const std::string& backend_id, const InferenceRequest& req);

using EmbeddingVector = std::vector<double>;

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

// ---------------------------------------------------------------------------
// Errors

class BackendError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Retryable failure (connection reset, 5xx, timeout).
class TransientError : public BackendError {
    using BackendError::BackendError;
};

/// The service reported it is over its rate limit.
class OverLimitError : public TransientError {
public:
    explicit OverLimitError(const std::string& what,
                            std::optional<std::chrono::milliseconds> retry_after = {})
        : TransientError(what), retry_after(retry_after) {}
    std::optional<std::chrono::milliseconds> retry_after;
};

/// Non-retryable failure (bad request, auth).
class PermanentError : public BackendError {
    using BackendError::BackendError;
};

/// All retry attempts failed; carries one line per attempt.
class ExhaustedError : public BackendError {
public:
    ExhaustedError(const std::string& backend, std::vector<std::string> attempts);
    std::vector<std::string> attempts;
};

class ConfigurationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class UnsupportedPairError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Raw model interfaces (one network round trip per call)

class ChatModel {
public:
    virtual ~ChatModel() = default;
    virtual std::string complete(const InferenceRequest& req) = 0;
};

class EmbeddingModel {
public:
    virtual ~EmbeddingModel() = default;
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

class TranslationModel {
public:
    virtual ~TranslationModel() = default;
    virtual bool supports(const LanguageCode& src, const LanguageCode& dst) const = 0;
    virtual std::string translate(const std::string& text, const LanguageCode& src,
                                  const LanguageCode& dst) = 0;
};

// ---------------------------------------------------------------------------
// Client infrastructure

/// Clock and sleep hooks; tests substitute a virtual clock.
struct Timing {
    std::function<std::chrono::steady_clock::time_point()> now;
    std::function<void(std::chrono::nanoseconds)> sleep;

    static Timing real();
};

class TokenBucket {
public:
    /// requests_per_minute <= 0 disables limiting.
    TokenBucket(double requests_per_minute, double burst, Timing timing);
    void acquire();

private:
    double rate_per_sec_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    Timing timing_;
    std::mutex mu_;
};

/// Counting gate bounding concurrent requests.
class InFlightGate {
public:
    explicit InFlightGate(std::size_t max_in_flight);

    class Permit {
    public:
        explicit Permit(InFlightGate& g) : gate_(&g) { gate_->enter(); }
        ~Permit() { gate_->leave(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        InFlightGate* gate_;
    };

    std::size_t peak() const { return peak_.load(); }
    std::size_t limit() const { return max_; }

private:
    void enter();
    void leave();

    std::size_t max_;
    std::size_t active_ = 0;
    std::atomic<std::size_t> peak_{0};
    std::mutex mu_;
    std::condition_variable cv_;
};

/// Key-value store of completed responses, optionally persisted to an
/// append-only line-delimited file. Safe for concurrent use.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(const std::filesystem::path& file);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    std::size_t size() const;

private:
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, std::string> entries_;
    std::optional<std::filesystem::path> file_;
    std::ofstream log_;
};

struct ClientPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{30000};
    std::size_t max_in_flight = 4;
    double requests_per_minute = 0;
    bool force_cache = false;
    std::size_t embed_batch_size = 64;
};

/// Chat client adding retries with exponential backoff, rate limiting,
/// bounded concurrency and caching on top of a ChatModel.
class ChatClient {
public:
    ChatClient(std::string backend_id, std::shared_ptr<ChatModel> model, ClientPolicy policy = {},
               std::shared_ptr<ResponseCache> cache = nullptr, Timing timing = Timing::real());

    /// Throws ExhaustedError after max_attempts transient failures and
    /// PermanentError immediately on a non-retryable one.
    std::string complete(const InferenceRequest& req);

    const std::string& id() const { return id_; }
    std::size_t network_calls() const { return network_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }
    std::size_t peak_in_flight() const { return gate_.peak(); }
    const ClientPolicy& policy() const { return policy_; }

private:
    std::string id_;
    std::shared_ptr<ChatModel> model_;
    ClientPolicy policy_;
    std::shared_ptr<ResponseCache> cache_;
    Timing timing_;
    TokenBucket bucket_;
    InFlightGate gate_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

class EmbeddingClient {
public:
    EmbeddingClient(std::string backend_id, std::shared_ptr<EmbeddingModel> model, std::size_t dim,
                    ClientPolicy policy = {}, Timing timing = Timing::real());

    /// Batches by policy.embed_batch_size; output order matches input order.
    /// A vector of the wrong dimension or with non-finite values is a
    /// ConfigurationError.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    std::size_t dim() const { return dim_; }
    std::size_t requests() const { return requests_.load(); }
    const std::string& id() const { return id_; }

private:
    std::string id_;
    std::shared_ptr<EmbeddingModel> model_;
    std::size_t dim_;
    ClientPolicy policy_;
    Timing timing_;
    TokenBucket bucket_;
    InFlightGate gate_;
    std::atomic<std::size_t> requests_{0};
};

/// Translation with a per-client memo of (text, src, dst).
class TranslationClient {
public:
    TranslationClient(std::string backend_id, std::shared_ptr<TranslationModel> model);

    std::string translate(const std::string& text, const LanguageCode& src,
                          const LanguageCode& dst);
    std::size_t network_calls() const { return network_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    std::string id_;
    std::shared_ptr<TranslationModel> model_;
    ResponseCache cache_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// Translation model that prompts a chat backend.
class ChatTranslationModel : public TranslationModel {
public:
    explicit ChatTranslationModel(std::shared_ptr<ChatClient> chat) : chat_(std::move(chat)) {}
    bool supports(const LanguageCode& src, const LanguageCode& dst) const override;
    std::string translate(const std::string& text, const LanguageCode& src,
                          const LanguageCode& dst) override;

private:
    std::shared_ptr<ChatClient> chat_;
};

// ---------------------------------------------------------------------------
// Registry

enum class BackendKind { chat, embedding, translation };

/// One entry of the backend registry file.
struct BackendSpec {
    std::string name;
    BackendKind kind = BackendKind::chat;
    std::string base_url;
    std::string api_key_env_var;
    std::string model;
    std::size_t max_in_flight = 4;
    double requests_per_minute = 0;
    std::size_t dim = kDefaultEmbeddingDim;
};

void to_json(json& j, const BackendSpec& s);
void from_json(const json& j, BackendSpec& s);

class Registry {
public:
    void add_chat(std::shared_ptr<ChatClient> client);
    void add_embedding(std::shared_ptr<EmbeddingClient> client);
    void add_translation(const std::string& name, std::shared_ptr<TranslationClient> client);

    bool has_chat(const std::string& name) const;
    bool has_embedding(const std::string& name) const;
    bool has_translation(const std::string& name) const;

    /// Throw ConfigurationError for an unregistered name.
    std::shared_ptr<ChatClient> chat(const std::string& name) const;
    std::shared_ptr<EmbeddingClient> embedding(const std::string& name) const;
    std::shared_ptr<TranslationClient> translation(const std::string& name) const;

    std::vector<std::string> chat_names() const;

private:
    std::map<std::string, std::shared_ptr<ChatClient>> chat_;
    std::map<std::string, std::shared_ptr<EmbeddingClient>> embedding_;
    std::map<std::string, std::shared_ptr<TranslationClient>> translation_;
};

/// Builds HTTP-backed clients for each spec. API keys are read from the named
/// environment variables; a missing variable leaves the key empty.
Registry build_http_registry(const std::vector<BackendSpec>& specs,
                             std::shared_ptr<ResponseCache> cache);

}  // namespace xforge::backends
