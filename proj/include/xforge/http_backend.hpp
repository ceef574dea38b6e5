#pragma once

#include <chrono>
#include <string>

#include "xforge/backends.hpp"

namespace xforge::backends {

/// Splits "http://host:port/v1" into the scheme-host-port part and the path
/// prefix ("/v1"). Throws ConfigurationError on a URL without a scheme.
struct BaseUrl {
    std::string origin;
    std::string prefix;
    static BaseUrl parse(const std::string& url);
};

/// Chat-completion endpoint: POST {base}/chat/completions with
/// {model, messages:[{role, content}], top_p, temperature, max_tokens};
/// reads choices[0].message.content.
class HttpChatModel : public ChatModel {
public:
    HttpChatModel(std::string base_url, std::string model, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(120));
    std::string complete(const InferenceRequest& req) override;

    /// Wire body for a request; exposed for contract tests.
    json request_body(const InferenceRequest& req) const;

private:
    BaseUrl base_;
    std::string model_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// Embedding endpoint: POST {base}/embeddings with {model, input:[strings]};
/// reads data[].embedding, honouring data[].index when present.
class HttpEmbeddingModel : public EmbeddingModel {
public:
    HttpEmbeddingModel(std::string base_url, std::string model, std::string api_key,
                       std::chrono::seconds timeout = std::chrono::seconds(120));
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    BaseUrl base_;
    std::string model_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// Maps an HTTP status to the error taxonomy: 429 is over-limit, 408 and
/// 5xx are transient, other non-2xx statuses are permanent.
[[noreturn]] void throw_for_status(int status, const std::string& body);

}  // namespace xforge::backends
