#include <httplib.h>

#include "xforge/http_backend.hpp"

#include <cstdlib>

namespace xforge::backends {

BaseUrl BaseUrl::parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigurationError("base_url '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    BaseUrl b;
    if (path_start == std::string::npos) {
        b.origin = url;
    } else {
        b.origin = url.substr(0, path_start);
        b.prefix = url.substr(path_start);
        while (!b.prefix.empty() && b.prefix.back() == '/') b.prefix.pop_back();
    }
    return b;
}

void throw_for_status(int status, const std::string& body) {
    const std::string msg = "HTTP " + std::to_string(status) + ": " + body.substr(0, 300);
    if (status == 429) throw OverLimitError(msg);
    if (status == 408 || status >= 500) throw TransientError(msg);
    throw PermanentError(msg);
}

namespace {

std::string post_json(const BaseUrl& base, const std::string& path, const std::string& api_key,
                      std::chrono::seconds timeout, const json& body) {
    httplib::Client cli(base.origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = cli.Post(base.prefix + path, headers, body.dump(), "application/json");
    if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
    if (res->status == 429) {
        std::optional<std::chrono::milliseconds> retry_after;
        if (res->has_header("Retry-After")) {
            const auto v = std::atof(res->get_header_value("Retry-After").c_str());
            if (v > 0) retry_after = std::chrono::milliseconds(static_cast<long long>(v * 1000));
        }
        throw OverLimitError("HTTP 429: " + res->body.substr(0, 300), retry_after);
    }
    if (res->status < 200 || res->status >= 300) throw_for_status(res->status, res->body);
    return res->body;
}

json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw TransientError("malformed response body: " + body.substr(0, 200));
    return j;
}

}  // namespace

HttpChatModel::HttpChatModel(std::string base_url, std::string model, std::string api_key,
                             std::chrono::seconds timeout)
    : base_(BaseUrl::parse(base_url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_(timeout) {}

json HttpChatModel::request_body(const InferenceRequest& req) const {
    json messages = json::array();
    if (!req.system_prompt.empty())
        messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
    return json{{"model", model_},
                {"messages", messages},
                {"top_p", req.sampling.top_p},
                {"temperature", req.sampling.temperature},
                {"max_tokens", req.sampling.max_new}};
}

std::string HttpChatModel::complete(const InferenceRequest& req) {
    const auto body = parse_body(post_json(base_, "/chat/completions", api_key_, timeout_,
                                           request_body(req)));
    try {
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw PermanentError(std::string("unexpected chat response shape: ") + e.what());
    }
}

HttpEmbeddingModel::HttpEmbeddingModel(std::string base_url, std::string model, std::string api_key,
                                       std::chrono::seconds timeout)
    : base_(BaseUrl::parse(base_url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_(timeout) {}

std::vector<EmbeddingVector> HttpEmbeddingModel::embed_batch(const std::vector<std::string>& texts) {
    const auto body = parse_body(post_json(base_, "/embeddings", api_key_, timeout_,
                                           json{{"model", model_}, {"input", texts}}));
    try {
        const auto& data = body.at("data");
        std::vector<EmbeddingVector> out(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
            if (slot >= out.size()) throw PermanentError("embedding index out of range");
            out[slot] = data[i].at("embedding").get<EmbeddingVector>();
        }
        return out;
    } catch (const json::exception& e) {
        throw PermanentError(std::string("unexpected embedding response shape: ") + e.what());
    }
}

Registry build_http_registry(const std::vector<BackendSpec>& specs,
                             std::shared_ptr<ResponseCache> cache) {
    Registry reg;
    for (const auto& spec : specs) {
        std::string key;
        if (!spec.api_key_env_var.empty()) {
            if (const char* v = std::getenv(spec.api_key_env_var.c_str())) key = v;
        }
        ClientPolicy policy;
        policy.max_in_flight = spec.max_in_flight;
        policy.requests_per_minute = spec.requests_per_minute;
        switch (spec.kind) {
            case BackendKind::chat:
                reg.add_chat(std::make_shared<ChatClient>(
                    spec.name, std::make_shared<HttpChatModel>(spec.base_url, spec.model, key),
                    policy, cache));
                break;
            case BackendKind::embedding:
                reg.add_embedding(std::make_shared<EmbeddingClient>(
                    spec.name, std::make_shared<HttpEmbeddingModel>(spec.base_url, spec.model, key),
                    spec.dim, policy));
                break;
            case BackendKind::translation: {
                auto chat = std::make_shared<ChatClient>(
                    spec.name, std::make_shared<HttpChatModel>(spec.base_url, spec.model, key),
                    policy, cache);
                reg.add_translation(spec.name, std::make_shared<TranslationClient>(
                                                   spec.name,
                                                   std::make_shared<ChatTranslationModel>(chat)));
                break;
            }
        }
    }
    return reg;
}

}  // namespace xforge::backends
