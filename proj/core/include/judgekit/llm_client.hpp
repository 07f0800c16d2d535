#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/result.hpp"

namespace judgekit::client {

/// Judge-inference defaults: temperature 0, top-p 1, 1024 output tokens.
/// provider_defaults leaves temperature/top_p/seed out of the request body
/// so proprietary endpoints run with their own defaults.
struct SamplingConfig {
    double temperature{0.0};
    double top_p{1.0};
    int max_tokens{1024};
    std::optional<int> seed;
    bool provider_defaults{false};

    bool operator==(const SamplingConfig&) const = default;
};

struct Message {
    std::string role;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct CompletionRequest {
    std::string model;
    std::vector<Message> messages;  // non-empty
    SamplingConfig sampling;

    bool operator==(const CompletionRequest&) const = default;
};

struct TokenUsage {
    long prompt_tokens{};
    long completion_tokens{};
};

struct CompletionResult {
    std::string text;
    std::string finish_reason;
    TokenUsage usage;
    bool from_cache{false};
};

/// Anything that can answer chat completions: the HTTP client in
/// production, scripted fakes in tests.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual Result<CompletionResult> complete(const CompletionRequest& request) = 0;
};

/// Runs the batch with at most `parallelism` requests in flight. Results
/// come back in input order; per-item failures stay in place and never
/// abort the batch. The backend must be safe for concurrent complete()
/// calls when parallelism > 1.
std::vector<Result<CompletionResult>> complete_batch(CompletionBackend& backend,
                                                     const std::vector<CompletionRequest>& requests,
                                                     int parallelism);

struct RetryPolicy {
    int max_attempts{4};
    std::chrono::milliseconds initial_backoff{200};
    double multiplier{2.0};
    std::chrono::milliseconds max_backoff{5000};
};

struct ClientConfig {
    std::string base_url;  // e.g. "https://api.openai.com/v1"; POSTs to <base_url>/chat/completions
    std::string api_key;
    RetryPolicy retry;
    std::optional<double> requests_per_second;
    std::optional<std::filesystem::path> cache_dir;  // caching on when set
    std::chrono::seconds timeout{120};
};

/// Fills base_url from JUDGE_API_BASE and api_key from JUDGE_API_KEY when
/// the corresponding field is empty.
ClientConfig apply_env(ClientConfig config);

/// OpenAI-compatible chat-completions client with exponential-backoff
/// retries on 429/5xx/transport failures, an optional request-per-second
/// limiter, and a content-addressed response cache keyed by
/// (endpoint, model, messages, sampling). Safe to share across threads.
class LlmClient final : public CompletionBackend {
public:
    explicit LlmClient(ClientConfig config);
    ~LlmClient() override;

    LlmClient(const LlmClient&) = delete;
    LlmClient& operator=(const LlmClient&) = delete;

    Result<CompletionResult> complete(const CompletionRequest& request) override;

    /// HTTP requests actually sent (cache hits excluded).
    std::size_t network_calls() const;

    /// Hex digest identifying a request against one endpoint.
    static std::string cache_key(const std::string& base_url, const CompletionRequest& request);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace judgekit::client
