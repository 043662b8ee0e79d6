#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamzero/prompts.hpp"

namespace spamzero {

struct BackendConfig {
    std::string backend_id;
    std::string endpoint_url;  // "mock" selects the offline backend
    std::string model_name;
    double temperature = 0.0;
    int max_completion_tokens = 16;
    double timeout_seconds = 60.0;
    int max_retries = 4;
    int rate_limit_per_minute = 60;
    std::string api_key_env = "OPENAI_API_KEY";
};

struct ChatExchange {
    ChatMessages request;
    double temperature = 0.0;
    int max_completion_tokens = 0;
    std::string completion_text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    int attempt_count = 1;
};

struct UsageTotals {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t requests = 0;
    std::int64_t wall_ms = 0;
};

UsageTotals usage_report(std::span<const ChatExchange> exchanges);

/// Injectable time source so retry/rate-limit behavior is testable
/// without real waiting.
struct Clock {
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

Clock& system_clock();

/// Sliding-window limiter: at most `per_minute` acquisitions in any
/// 60-second window, shared across threads.
class RateLimiter {
public:
    RateLimiter(int per_minute, Clock& clock);
    void acquire();

private:
    int per_minute_;
    Clock& clock_;
    std::mutex mu_;
    std::vector<std::int64_t> issued_;  // timestamps within the window
};

class Backend {
public:
    virtual ~Backend() = default;
    const BackendConfig& config() const { return cfg_; }

    /// Runs one chat completion. `max_tokens_override` substitutes the
    /// configured completion budget for this call only.
    virtual ChatExchange complete(const ChatMessages& messages,
                                  std::optional<int> max_tokens_override = std::nullopt) = 0;

protected:
    explicit Backend(BackendConfig cfg) : cfg_(std::move(cfg)) {}
    BackendConfig cfg_;
};

/// Deterministic offline backend: keyword-rule classification and
/// extractive two-sentence summaries.
class MockBackend : public Backend {
public:
    explicit MockBackend(BackendConfig cfg) : Backend(std::move(cfg)) {}
    ChatExchange complete(const ChatMessages& messages,
                          std::optional<int> max_tokens_override = std::nullopt) override;

    std::uint64_t call_count() const { return calls_; }

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Pure function behind MockBackend; exposed for oracle tests.
std::string mock_complete(const ChatMessages& messages);

/// Chat-completions HTTP client with bounded retries (exponential
/// backoff, full jitter) and a per-backend rate limiter.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg, Clock& clock = system_clock());
    ChatExchange complete(const ChatMessages& messages,
                          std::optional<int> max_tokens_override = std::nullopt) override;

private:
    Clock& clock_;
    RateLimiter limiter_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace spamzero
