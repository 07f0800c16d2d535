#include "judgekit/llm_client.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>

#include <json.hpp>

namespace judgekit::client {

using nlohmann::json;

namespace {

json request_body(const CompletionRequest& request) {
    json body;
    body["model"] = request.model;
    json messages = json::array();
    for (const auto& message : request.messages) {
        messages.push_back({{"role", message.role}, {"content", message.content}});
    }
    body["messages"] = std::move(messages);
    body["max_tokens"] = request.sampling.max_tokens;
    if (!request.sampling.provider_defaults) {
        body["temperature"] = request.sampling.temperature;
        body["top_p"] = request.sampling.top_p;
        if (request.sampling.seed) body["seed"] = *request.sampling.seed;
    }
    return body;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

Result<CompletionResult> parse_completion(const std::string& body) try {
    json obj = json::parse(body, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        return make_error(ErrorCode::MalformedResponse, "reply body is not JSON");
    }
    if (!obj.contains("choices") || !obj["choices"].is_array() || obj["choices"].empty()) {
        return make_error(ErrorCode::MalformedResponse, "reply has no choices");
    }
    const auto& choice = obj["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) {
        return make_error(ErrorCode::MalformedResponse, "choice has no message.content");
    }
    CompletionResult result;
    if (choice["message"]["content"].is_string()) {
        result.text = choice["message"]["content"].get<std::string>();
    }
    result.finish_reason = choice.value("finish_reason", "stop");
    if (result.text.empty() && result.finish_reason == "stop") {
        return make_error(ErrorCode::MalformedResponse, "empty text with normal finish reason");
    }
    if (obj.contains("usage") && obj["usage"].is_object()) {
        result.usage.prompt_tokens = obj["usage"].value("prompt_tokens", 0L);
        result.usage.completion_tokens = obj["usage"].value("completion_tokens", 0L);
    }
    return result;
} catch (const json::exception& e) {
    return make_error(ErrorCode::MalformedResponse, e.what());
}

}  // namespace

ClientConfig apply_env(ClientConfig config) {
    if (config.base_url.empty()) {
        if (const char* base = std::getenv("JUDGE_API_BASE")) config.base_url = base;
    }
    if (config.api_key.empty()) {
        if (const char* key = std::getenv("JUDGE_API_KEY")) config.api_key = key;
    }
    return config;
}

struct LlmClient::Impl {
    ClientConfig config;
    std::string host;  // scheme://authority
    std::string path_prefix;

    std::mutex rate_mutex;
    std::chrono::steady_clock::time_point next_slot = std::chrono::steady_clock::now();

    std::mutex cache_mutex;
    std::atomic<std::size_t> network_calls{0};

    explicit Impl(ClientConfig cfg) : config(std::move(cfg)) {
        const auto scheme_end = config.base_url.find("://");
        if (scheme_end == std::string::npos) {
            throw std::invalid_argument("LlmClient: base_url must include a scheme: " +
                                        config.base_url);
        }
        auto path_start = config.base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            host = config.base_url;
        } else {
            host = config.base_url.substr(0, path_start);
            path_prefix = config.base_url.substr(path_start);
            while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
        }
    }

    std::filesystem::path cache_path(const std::string& key) const {
        return *config.cache_dir / (key + ".json");
    }

    std::optional<CompletionResult> cache_lookup(const std::string& key) {
        if (!config.cache_dir) return std::nullopt;
        std::lock_guard lock(cache_mutex);
        std::ifstream in(cache_path(key));
        if (!in) return std::nullopt;
        try {
            json obj = json::parse(in, nullptr, false);
            if (obj.is_discarded() || !obj.contains("result")) return std::nullopt;
            CompletionResult result;
            result.text = obj["result"].value("text", "");
            result.finish_reason = obj["result"].value("finish_reason", "stop");
            result.usage.prompt_tokens = obj["result"].value("prompt_tokens", 0L);
            result.usage.completion_tokens = obj["result"].value("completion_tokens", 0L);
            result.from_cache = true;
            return result;
        } catch (const json::exception&) {
            return std::nullopt;  // corrupt entry, refetch
        }
    }

    void cache_store(const std::string& key, const CompletionRequest& request,
                     const CompletionResult& result) {
        if (!config.cache_dir) return;
        std::lock_guard lock(cache_mutex);
        std::error_code ec;
        std::filesystem::create_directories(*config.cache_dir, ec);
        json obj;
        obj["request"] = request_body(request);
        obj["endpoint"] = config.base_url;
        obj["result"] = {{"text", result.text},
                         {"finish_reason", result.finish_reason},
                         {"prompt_tokens", result.usage.prompt_tokens},
                         {"completion_tokens", result.usage.completion_tokens}};
        std::ofstream out(cache_path(key), std::ios::binary);
        out << obj.dump(2);
    }

    void wait_rate_slot() {
        if (!config.requests_per_second) return;
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / *config.requests_per_second));
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(rate_mutex);
            const auto now = std::chrono::steady_clock::now();
            if (next_slot < now) next_slot = now;
            slot = next_slot;
            next_slot += interval;
        }
        std::this_thread::sleep_until(slot);
    }

    Result<CompletionResult> perform(const CompletionRequest& request) {
        const std::string payload = request_body(request).dump();
        const std::string target = path_prefix + "/chat/completions";

        httplib::Headers headers;
        if (!config.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config.api_key);
        }

        auto backoff = config.retry.initial_backoff;
        Error last_error = make_error(ErrorCode::RequestFailed, "no attempt made");
        for (int attempt = 1; attempt <= config.retry.max_attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(backoff);
                backoff = std::min(
                    std::chrono::milliseconds(static_cast<long>(
                        static_cast<double>(backoff.count()) * config.retry.multiplier)),
                    config.retry.max_backoff);
            }
            wait_rate_slot();

            httplib::Client http(host);
            http.set_connection_timeout(config.timeout.count(), 0);
            http.set_read_timeout(config.timeout.count(), 0);
            http.set_write_timeout(config.timeout.count(), 0);

            network_calls.fetch_add(1, std::memory_order_relaxed);
            auto res = http.Post(target, headers, payload, "application/json");

            if (!res) {
                const bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                                       res.error() == httplib::Error::Read ||
                                       res.error() == httplib::Error::Write;
                last_error = make_error(timed_out ? ErrorCode::Timeout : ErrorCode::RequestFailed,
                                        "transport: " + httplib::to_string(res.error()));
                continue;  // transient
            }
            if (res->status == 401 || res->status == 403) {
                return make_error(ErrorCode::AuthError,
                                  "endpoint returned HTTP " + std::to_string(res->status));
            }
            if (res->status == 429) {
                last_error = make_error(ErrorCode::RateLimitExhausted,
                                        "still rate limited after " + std::to_string(attempt) +
                                            " attempt(s)");
                continue;
            }
            if (res->status >= 500) {
                last_error = make_error(ErrorCode::RequestFailed,
                                        "endpoint returned HTTP " + std::to_string(res->status));
                continue;
            }
            if (res->status != 200) {
                return make_error(ErrorCode::RequestFailed,
                                  "endpoint returned HTTP " + std::to_string(res->status));
            }
            return parse_completion(res->body);
        }
        return last_error;
    }
};

LlmClient::LlmClient(ClientConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

LlmClient::~LlmClient() = default;

std::string LlmClient::cache_key(const std::string& base_url, const CompletionRequest& request) {
    json key;
    key["endpoint"] = base_url;
    key["body"] = request_body(request);
    // provider_defaults changes the wire body, so it is already part of the key
    return sha256_hex(key.dump());
}

Result<CompletionResult> LlmClient::complete(const CompletionRequest& request) {
    if (request.messages.empty()) {
        throw std::invalid_argument("CompletionRequest.messages must be non-empty");
    }
    const std::string key = cache_key(impl_->config.base_url, request);
    if (auto cached = impl_->cache_lookup(key)) {
        return *cached;
    }
    auto result = impl_->perform(request);
    if (result.ok()) {
        impl_->cache_store(key, request, result.value());
    }
    return result;
}

std::size_t LlmClient::network_calls() const {
    return impl_->network_calls.load(std::memory_order_relaxed);
}

std::vector<Result<CompletionResult>> complete_batch(CompletionBackend& backend,
                                                     const std::vector<CompletionRequest>& requests,
                                                     int parallelism) {
    if (parallelism < 1) {
        throw std::invalid_argument("complete_batch: parallelism must be >= 1");
    }
    std::vector<std::optional<Result<CompletionResult>>> slots(requests.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                slots[i] = backend.complete(requests[i]);
            } catch (const std::exception& e) {
                slots[i] = Result<CompletionResult>(make_error(ErrorCode::RequestFailed, e.what()));
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), requests.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& thread : threads) thread.join();
    }

    std::vector<Result<CompletionResult>> results;
    results.reserve(slots.size());
    for (auto& slot : slots) results.push_back(std::move(*slot));
    return results;
}

}  // namespace judgekit::client
