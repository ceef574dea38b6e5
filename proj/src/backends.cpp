#include "xforge/backends.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "xforge/hash.hpp"
#include "xforge/text.hpp"

namespace xforge::backends {

using namespace std::chrono;

void InferenceRequest::validate() const {
    if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0))
        throw std::invalid_argument("top_p must be in (0, 1]");
    if (!(sampling.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (sampling.max_new < 1) throw std::invalid_argument("max_new must be >= 1");
}

json canonical(const InferenceRequest& req) {
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    return json{{"system", req.system_prompt},
                {"user", req.user_prompt},
                {"top_p", req.sampling.top_p},
                {"temperature", req.sampling.temperature},
                {"max_new", req.sampling.max_new}};
}

std::string cache_key(const std::string& backend_id, const InferenceRequest& req) {
    return sha256_hex(backend_id + "\n" + canonical(req).dump());
}

ExhaustedError::ExhaustedError(const std::string& backend, std::vector<std::string> log)
    : BackendError([&] {
          std::string msg = "backend '" + backend + "' failed after " +
                            std::to_string(log.size()) + " attempts";
          for (const auto& line : log) msg += "\n  " + line;
          return msg;
      }()),
      attempts(std::move(log)) {}

Timing Timing::real() {
    return Timing{[] { return steady_clock::now(); },
                  [](nanoseconds d) { std::this_thread::sleep_for(d); }};
}

// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double requests_per_minute, double burst, Timing timing)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(capacity_),
      last_(timing.now()),
      timing_(std::move(timing)) {}

void TokenBucket::acquire() {
    if (rate_per_sec_ <= 0) return;
    while (true) {
        nanoseconds wait{};
        {
            std::lock_guard lock(mu_);
            const auto now = timing_.now();
            const double elapsed = duration<double>(now - last_).count();
            tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = duration_cast<nanoseconds>(duration<double>((1.0 - tokens_) / rate_per_sec_));
        }
        timing_.sleep(std::max(wait, nanoseconds(1)));
    }
}

InFlightGate::InFlightGate(std::size_t max_in_flight) : max_(std::max<std::size_t>(1, max_in_flight)) {}

void InFlightGate::enter() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < max_; });
    ++active_;
    if (active_ > peak_.load()) peak_.store(active_);
}

void InFlightGate::leave() {
    {
        std::lock_guard lock(mu_);
        --active_;
    }
    cv_.notify_one();
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(const std::filesystem::path& file) : file_(file) {
    if (std::filesystem::exists(file)) {
        read_jsonl(file, [&](const json& rec) {
            if (rec.is_object() && rec.contains("key") && rec.contains("value"))
                entries_[rec["key"].get<std::string>()] = rec["value"].get<std::string>();
            return true;
        });
    } else if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    log_.open(file, std::ios::app);
    if (!log_) throw std::runtime_error("cannot open cache file " + file.string());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
    std::unique_lock lock(mu_);
    if (!entries_.emplace(key, value).second) return;
    if (log_.is_open()) {
        log_ << json{{"key", key}, {"value", value}}.dump() << '\n';
        log_.flush();
    }
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------------------

namespace {

milliseconds backoff_for(const ClientPolicy& p, int attempt) {
    const double factor = std::pow(2.0, attempt - 1);
    const auto raw = static_cast<long long>(static_cast<double>(p.base_backoff.count()) * factor);
    return std::min(milliseconds(raw), p.max_backoff);
}

/// Runs fn with retries. fn performs exactly one network round trip.
template <typename Fn>
auto with_retries(const std::string& id, const ClientPolicy& policy, const Timing& timing,
                  TokenBucket& bucket, InFlightGate& gate, std::atomic<std::size_t>& calls, Fn&& fn)
    -> decltype(fn()) {
    std::vector<std::string> log;
    const int attempts = std::max(1, policy.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        milliseconds delay = backoff_for(policy, attempt);
        bucket.acquire();
        try {
            InFlightGate::Permit permit(gate);
            ++calls;
            return fn();
        } catch (const OverLimitError& e) {
            log.push_back("attempt " + std::to_string(attempt) + ": over limit: " + e.what());
            if (e.retry_after) delay = std::max(delay, *e.retry_after);
        } catch (const TransientError& e) {
            log.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
        }
        if (attempt < attempts) timing.sleep(delay);
    }
    throw ExhaustedError(id, std::move(log));
}

}  // namespace

ChatClient::ChatClient(std::string backend_id, std::shared_ptr<ChatModel> model,
                       ClientPolicy policy, std::shared_ptr<ResponseCache> cache, Timing timing)
    : id_(std::move(backend_id)),
      model_(std::move(model)),
      policy_(policy),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      timing_(timing),
      bucket_(policy.requests_per_minute, static_cast<double>(policy.max_in_flight), timing),
      gate_(policy.max_in_flight) {}

std::string ChatClient::complete(const InferenceRequest& req) {
    req.validate();
    const bool cacheable = policy_.force_cache || req.sampling.temperature == 0.0;
    std::string key;
    if (cacheable) {
        key = cache_key(id_, req);
        if (auto hit = cache_->get(key)) {
            ++cache_hits_;
            return *hit;
        }
    }
    auto out = with_retries(id_, policy_, timing_, bucket_, gate_, network_calls_,
                            [&] { return model_->complete(req); });
    if (cacheable) cache_->put(key, out);
    return out;
}

// ---------------------------------------------------------------------------

EmbeddingClient::EmbeddingClient(std::string backend_id, std::shared_ptr<EmbeddingModel> model,
                                 std::size_t dim, ClientPolicy policy, Timing timing)
    : id_(std::move(backend_id)),
      model_(std::move(model)),
      dim_(dim),
      policy_(policy),
      timing_(timing),
      bucket_(policy.requests_per_minute, static_cast<double>(policy.max_in_flight), timing),
      gate_(policy.max_in_flight) {
    if (dim_ == 0) throw ConfigurationError("embedding dim must be >= 1");
    if (policy_.embed_batch_size == 0) throw ConfigurationError("embed batch size must be >= 1");
}

std::vector<EmbeddingVector> EmbeddingClient::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: no texts");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::size_t batch = policy_.embed_batch_size;
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        const std::size_t end = std::min(texts.size(), start + batch);
        std::vector<std::string> chunk(texts.begin() + static_cast<long>(start),
                                       texts.begin() + static_cast<long>(end));
        auto vecs = with_retries(id_, policy_, timing_, bucket_, gate_, requests_,
                                 [&] { return model_->embed_batch(chunk); });
        if (vecs.size() != chunk.size())
            throw ConfigurationError("backend '" + id_ + "' returned " +
                                     std::to_string(vecs.size()) + " vectors for " +
                                     std::to_string(chunk.size()) + " texts");
        for (auto& v : vecs) {
            if (v.size() != dim_)
                throw ConfigurationError("backend '" + id_ + "' returned dim " +
                                         std::to_string(v.size()) + ", expected " +
                                         std::to_string(dim_));
            for (double x : v)
                if (!std::isfinite(x))
                    throw ConfigurationError("backend '" + id_ + "' returned a non-finite value");
            out.push_back(std::move(v));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

TranslationClient::TranslationClient(std::string backend_id, std::shared_ptr<TranslationModel> model)
    : id_(std::move(backend_id)), model_(std::move(model)) {}

std::string TranslationClient::translate(const std::string& body, const LanguageCode& src,
                                         const LanguageCode& dst) {
    if (src == dst) throw std::invalid_argument("translate: source and target are both " + src.code());
    if (!model_->supports(src, dst))
        throw UnsupportedPairError("translate: " + src.code() + "->" + dst.code() +
                                   " not supported by '" + id_ + "'");
    const auto key = sha256_hex(id_ + "\n" + src.code() + "\n" + dst.code() + "\n" + body);
    if (auto hit = cache_.get(key)) {
        ++cache_hits_;
        return *hit;
    }
    ++network_calls_;
    auto out = model_->translate(body, src, dst);
    cache_.put(key, out);
    return out;
}

bool ChatTranslationModel::supports(const LanguageCode& src, const LanguageCode& dst) const {
    return src != dst;
}

std::string ChatTranslationModel::translate(const std::string& body, const LanguageCode& src,
                                            const LanguageCode& dst) {
    InferenceRequest req;
    req.system_prompt = "You are a professional translator.";
    req.user_prompt = text::render(
        "Translate the following text from {src} to {dst}. Output only the translation.\n\n{text}",
        {{"src", std::string(english_name(src))},
         {"dst", std::string(english_name(dst))},
         {"text", body}});
    req.sampling = Sampling{1.0, 0.0, 4096};
    return std::string(text::trim(chat_->complete(req)));
}

// ---------------------------------------------------------------------------

namespace {

std::string_view kind_name(BackendKind k) {
    switch (k) {
        case BackendKind::chat: return "chat";
        case BackendKind::embedding: return "embedding";
        case BackendKind::translation: return "translation";
    }
    return "chat";
}

}  // namespace

void to_json(json& j, const BackendSpec& s) {
    j = json{{"name", s.name},
             {"kind", kind_name(s.kind)},
             {"base_url", s.base_url},
             {"api_key_env_var", s.api_key_env_var},
             {"model", s.model},
             {"max_in_flight", s.max_in_flight},
             {"requests_per_minute", s.requests_per_minute},
             {"dim", s.dim}};
}

void from_json(const json& j, BackendSpec& s) {
    s.name = j.at("name").get<std::string>();
    const auto kind = j.value("kind", std::string("chat"));
    if (kind == "chat")
        s.kind = BackendKind::chat;
    else if (kind == "embedding")
        s.kind = BackendKind::embedding;
    else if (kind == "translation")
        s.kind = BackendKind::translation;
    else
        throw ConfigurationError("backend '" + s.name + "': unknown kind '" + kind + "'");
    s.base_url = j.at("base_url").get<std::string>();
    s.api_key_env_var = j.value("api_key_env_var", std::string{});
    s.model = j.value("model", std::string{});
    s.max_in_flight = j.value("max_in_flight", std::size_t{4});
    s.requests_per_minute = j.value("requests_per_minute", 0.0);
    s.dim = j.value("dim", kDefaultEmbeddingDim);
    if (s.max_in_flight == 0) throw ConfigurationError("backend '" + s.name + "': max_in_flight 0");
}

void Registry::add_chat(std::shared_ptr<ChatClient> client) {
    const auto name = client->id();
    chat_[name] = std::move(client);
}

void Registry::add_embedding(std::shared_ptr<EmbeddingClient> client) {
    const auto name = client->id();
    embedding_[name] = std::move(client);
}

void Registry::add_translation(const std::string& name, std::shared_ptr<TranslationClient> client) {
    translation_[name] = std::move(client);
}

bool Registry::has_chat(const std::string& name) const { return chat_.count(name) > 0; }
bool Registry::has_embedding(const std::string& name) const { return embedding_.count(name) > 0; }
bool Registry::has_translation(const std::string& name) const {
    return translation_.count(name) > 0;
}

std::shared_ptr<ChatClient> Registry::chat(const std::string& name) const {
    auto it = chat_.find(name);
    if (it == chat_.end()) throw ConfigurationError("no chat backend named '" + name + "'");
    return it->second;
}

std::shared_ptr<EmbeddingClient> Registry::embedding(const std::string& name) const {
    auto it = embedding_.find(name);
    if (it == embedding_.end()) throw ConfigurationError("no embedding backend named '" + name + "'");
    return it->second;
}

std::shared_ptr<TranslationClient> Registry::translation(const std::string& name) const {
    auto it = translation_.find(name);
    if (it == translation_.end())
        throw ConfigurationError("no translation backend named '" + name + "'");
    return it->second;
}

std::vector<std::string> Registry::chat_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : chat_) out.push_back(name);
    return out;
}

}  // namespace xforge::backends
