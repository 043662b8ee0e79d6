#include "spamzero/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <json.hpp>

#include "spamzero/errors.hpp"
#include "spamzero/text.hpp"

// httplib pulled in last: it defines min/max-sensitive macros on some platforms
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace spamzero {

using nlohmann::json;

UsageTotals usage_report(std::span<const ChatExchange> exchanges) {
    UsageTotals t;
    for (const auto& e : exchanges) {
        t.prompt_tokens += e.prompt_tokens;
        t.completion_tokens += e.completion_tokens;
        t.requests += 1;
        t.wall_ms += e.latency_ms;
    }
    return t;
}

namespace {

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
    void sleep_ms(std::int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

}  // namespace

Clock& system_clock() {
    static SystemClock clock;
    return clock;
}

RateLimiter::RateLimiter(int per_minute, Clock& clock)
    : per_minute_(std::max(per_minute, 1)), clock_(clock) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        const std::int64_t now = clock_.now_ms();
        std::erase_if(issued_, [&](std::int64_t t) { return t <= now - 60'000; });
        if (issued_.size() < static_cast<std::size_t>(per_minute_)) {
            issued_.push_back(now);
            return;
        }
        const std::int64_t wake = *std::min_element(issued_.begin(), issued_.end()) + 60'000;
        lock.unlock();
        clock_.sleep_ms(std::max<std::int64_t>(wake - now, 1));
        lock.lock();
    }
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kSpamKeywords[] = {"viagra", "winner", "free money", "click here",
                                              "unsubscribe now"};

// Content between the two "###" delimiter lines (whole lines, not the
// '###' mention inside the instruction text), with the [SUBJECT] and
// [BODY] tags removed.
std::string embedded_block(std::string_view user_text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= user_text.size()) {
        std::size_t eol = user_text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(user_text.substr(pos));
            break;
        }
        lines.push_back(user_text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    std::size_t first = lines.size(), second = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i] != "###") continue;
        if (first == lines.size()) first = i;
        else { second = i; break; }
    }
    if (second == lines.size()) return {};
    std::string block;
    for (std::size_t i = first + 1; i < second; ++i) {
        if (!block.empty()) block.push_back('\n');
        block += lines[i];
    }
    for (std::string_view tag : {"[SUBJECT]", "[BODY]"}) {
        std::size_t pos;
        while ((pos = block.find(tag)) != std::string::npos) block.erase(pos, tag.size());
    }
    std::string_view trimmed = block;
    while (!trimmed.empty() && text::is_ascii_space(trimmed.front())) trimmed.remove_prefix(1);
    while (!trimmed.empty() && text::is_ascii_space(trimmed.back())) trimmed.remove_suffix(1);
    return std::string(trimmed);
}

bool has_spam_keyword(std::string_view content) {
    for (std::string_view kw : kSpamKeywords) {
        if (text::contains_ci(content, kw)) return true;
    }
    return false;
}

std::vector<std::string> split_sentences(std::string_view content) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : content) {
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            std::string_view t = cur;
            while (!t.empty() && text::is_ascii_space(t.front())) t.remove_prefix(1);
            if (!t.empty()) out.emplace_back(t);
            cur.clear();
        }
    }
    std::string_view t = cur;
    while (!t.empty() && text::is_ascii_space(t.front())) t.remove_prefix(1);
    while (!t.empty() && text::is_ascii_space(t.back())) t.remove_suffix(1);
    if (!t.empty()) out.emplace_back(t);
    return out;
}

std::size_t rough_tokens(std::string_view t) { return (text::scalar_count(t) + 3) / 4; }

}  // namespace

std::string mock_complete(const ChatMessages& messages) {
    std::string_view user_text;
    for (const auto& m : messages) {
        if (m.role == Role::user) user_text = m.text;
    }
    if (user_text.find("Please summarise it") != std::string_view::npos) {
        const std::string content = embedded_block(user_text);
        auto sentences = split_sentences(content);
        std::string out = "Summary: ";
        for (std::size_t i = 0; i < sentences.size() && i < 2; ++i) {
            if (i > 0) out.push_back(' ');
            out += sentences[i];
        }
        return out;
    }
    if (user_text.find("Please classify") != std::string_view::npos) {
        return has_spam_keyword(embedded_block(user_text)) ? "spam" : "ham";
    }
    return "ham";
}

ChatExchange MockBackend::complete(const ChatMessages& messages,
                                   std::optional<int> max_tokens_override) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    ChatExchange ex;
    ex.request = messages;
    ex.temperature = cfg_.temperature;
    ex.max_completion_tokens = max_tokens_override.value_or(cfg_.max_completion_tokens);
    ex.completion_text = mock_complete(messages);
    for (const auto& m : messages) ex.prompt_tokens += rough_tokens(m.text);
    ex.completion_tokens = rough_tokens(ex.completion_text);
    ex.latency_ms = 0;
    ex.attempt_count = 1;
    return ex;
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    bool https = false;
    std::string host;
    int port = 0;
    std::string path = "/v1/chat/completions";
};

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl u;
    std::string rest = url;
    if (rest.rfind("https://", 0) == 0) {
        u.https = true;
        rest = rest.substr(8);
    } else if (rest.rfind("http://", 0) == 0) {
        rest = rest.substr(7);
    }
    std::size_t slash = rest.find('/');
    std::string hostport = rest.substr(0, slash);
    if (slash != std::string::npos && slash + 1 < rest.size()) {
        u.path = rest.substr(slash);
    }
    std::size_t colon = hostport.find(':');
    if (colon != std::string::npos) {
        u.host = hostport.substr(0, colon);
        u.port = std::stoi(hostport.substr(colon + 1));
    } else {
        u.host = hostport;
        u.port = u.https ? 443 : 80;
    }
    return u;
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

std::int64_t backoff_ms(int attempt, std::mt19937_64& rng) {
    // exponential base 1s, factor 2, full jitter, cap 60s
    const double cap_ms = 60'000.0;
    double ceiling = std::min(cap_ms, 1000.0 * static_cast<double>(1ull << std::min(attempt, 20)));
    std::uniform_real_distribution<double> dist(0.0, ceiling);
    return static_cast<std::int64_t>(dist(rng));
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg, Clock& clock)
    : Backend(std::move(cfg)), clock_(clock), limiter_(cfg_.rate_limit_per_minute, clock) {}

ChatExchange HttpBackend::complete(const ChatMessages& messages,
                                   std::optional<int> max_tokens_override) {
    const ParsedUrl url = parse_url(cfg_.endpoint_url);
    const char* key = cfg_.api_key_env.empty() ? nullptr : std::getenv(cfg_.api_key_env.c_str());

    json body;
    body["model"] = cfg_.model_name;
    body["temperature"] = cfg_.temperature;
    body["max_tokens"] = max_tokens_override.value_or(cfg_.max_completion_tokens);
    body["messages"] = json::array();
    for (const auto& m : messages) {
        body["messages"].push_back(
            {{"role", m.role == Role::system ? "system" : "user"}, {"content", m.text}});
    }
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    thread_local std::mt19937_64 rng{std::random_device{}()};
    const std::int64_t start = clock_.now_ms();
    std::string last_error;

    for (int attempt = 1; attempt <= cfg_.max_retries + 1; ++attempt) {
        limiter_.acquire();

        auto do_post = [&](auto& client) {
            client.set_connection_timeout(static_cast<int>(cfg_.timeout_seconds), 0);
            client.set_read_timeout(static_cast<int>(cfg_.timeout_seconds), 0);
            client.set_write_timeout(static_cast<int>(cfg_.timeout_seconds), 0);
            return client.Post(url.path, headers, payload, "application/json");
        };
        httplib::Result res = [&] {
            if (url.https) {
                httplib::SSLClient client(url.host, url.port);
                return do_post(client);
            }
            httplib::Client client(url.host, url.port);
            return do_post(client);
        }();

        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("backend '" + cfg_.backend_id + "' rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        } else if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("choices") ||
                !parsed["choices"].is_array() || parsed["choices"].empty()) {
                throw MalformedResponse("backend '" + cfg_.backend_id +
                                        "' returned an unparseable completion body");
            }
            ChatExchange ex;
            ex.request = messages;
            ex.temperature = cfg_.temperature;
            ex.max_completion_tokens = max_tokens_override.value_or(cfg_.max_completion_tokens);
            const json& choice = parsed["choices"][0];
            if (!choice.contains("message") || !choice["message"].contains("content")) {
                throw MalformedResponse("backend '" + cfg_.backend_id +
                                        "' choice has no message content");
            }
            ex.completion_text = choice["message"]["content"].get<std::string>();
            if (parsed.contains("usage")) {
                ex.prompt_tokens = parsed["usage"].value("prompt_tokens", 0u);
                ex.completion_tokens = parsed["usage"].value("completion_tokens", 0u);
            }
            ex.latency_ms = clock_.now_ms() - start;
            ex.attempt_count = attempt;
            return ex;
        }

        if (attempt <= cfg_.max_retries) {
            clock_.sleep_ms(backoff_ms(attempt, rng));
        }
    }
    throw ExhaustedRetries("backend '" + cfg_.backend_id + "' failed after " +
                           std::to_string(cfg_.max_retries + 1) + " attempts; last: " +
                           last_error);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    if (cfg.endpoint_url == "mock" || cfg.backend_id == "mock") {
        return std::make_unique<MockBackend>(cfg);
    }
    return std::make_unique<HttpBackend>(cfg);
}

}  // namespace spamzero
