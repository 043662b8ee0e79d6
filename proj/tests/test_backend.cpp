#include <doctest.h>

#include <atomic>
#include <thread>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "spamzero/backend.hpp"
#include "spamzero/errors.hpp"

using namespace spamzero;
using nlohmann::json;

namespace {

// Virtual time: sleeping advances the clock instantly.
class FakeClock final : public Clock {
public:
    std::int64_t now_ms() override { return now_; }
    void sleep_ms(std::int64_t ms) override {
        now_ += ms;
        total_slept_ += ms;
    }
    std::int64_t total_slept() const { return total_slept_; }

private:
    std::int64_t now_ = 0;
    std::int64_t total_slept_ = 0;
};

ChatMessages classify_messages(const std::string& content) {
    return {{Role::system, "classifier"},
            {Role::user, "Please classify the following email with a one-word answer.\n\n###\n\n" +
                             content + "\n\n###\n\nAnswer:"}};
}

ChatMessages summarize_messages(const std::string& content) {
    return {{Role::system, "summariser"},
            {Role::user, "Please summarise it ensuring brevity.\n\n###\n\n" + content +
                             "\n\n###\n\nAnswer:"}};
}

BackendConfig mock_config() {
    BackendConfig cfg;
    cfg.backend_id = "mock";
    cfg.endpoint_url = "mock";
    cfg.model_name = "mock";
    return cfg;
}

}  // namespace

TEST_CASE("mock classification follows the keyword rule") {
    CHECK(mock_complete(classify_messages("[SUBJECT] Hi\n[BODY] You are a WINNER, click here")) ==
          "spam");
    CHECK(mock_complete(classify_messages("[SUBJECT] Hi\n[BODY] Meeting moved to 3pm")) == "ham");
    CHECK(mock_complete(classify_messages("[SUBJECT] cheap ViAgRa\n[BODY] x")) == "spam");
    CHECK(mock_complete(classify_messages("[SUBJECT] \n[BODY] free money inside")) == "spam");
}

TEST_CASE("mock summarization returns the first two sentences") {
    auto msgs = summarize_messages(
        "[SUBJECT] \n[BODY] One here. Two there. Three now. Four then. Five end.");
    CHECK(mock_complete(msgs) == "Summary: One here. Two there.");

    CHECK(mock_complete(summarize_messages("[SUBJECT] \n[BODY] ")) == "Summary: ");
    CHECK(mock_complete(summarize_messages("[SUBJECT] \n[BODY] no terminator text")) ==
          "Summary: no terminator text");
}

TEST_CASE("mock purity: same messages, same completion") {
    auto msgs = classify_messages("[SUBJECT] a\n[BODY] b. c. d.");
    CHECK(mock_complete(msgs) == mock_complete(msgs));
}

TEST_CASE("MockBackend fills exchange accounting") {
    MockBackend backend(mock_config());
    auto ex = backend.complete(classify_messages("[SUBJECT] x\n[BODY] winner"));
    CHECK(ex.completion_text == "spam");
    CHECK(ex.prompt_tokens > 0);
    CHECK(ex.completion_tokens > 0);
    CHECK(ex.attempt_count == 1);
    CHECK(backend.call_count() == 1);
}

TEST_CASE("usage_report sums exchanges") {
    CHECK(usage_report({}).requests == 0);
    std::vector<ChatExchange> exchanges(2);
    exchanges[0].prompt_tokens = 10;
    exchanges[0].completion_tokens = 5;
    exchanges[1].prompt_tokens = 20;
    exchanges[1].completion_tokens = 7;
    auto t = usage_report(exchanges);
    CHECK(t.prompt_tokens == 30);
    CHECK(t.completion_tokens == 12);
    CHECK(t.requests == 2);
}

TEST_CASE("rate limiter: at most rate_limit acquisitions per 60s window") {
    FakeClock clock;
    RateLimiter limiter(5, clock);
    std::vector<std::int64_t> stamps;
    for (int i = 0; i < 23; ++i) {
        limiter.acquire();
        stamps.push_back(clock.now_ms());
    }
    for (std::size_t i = 0; i < stamps.size(); ++i) {
        std::size_t in_window = 0;
        for (std::size_t k = 0; k <= i; ++k) {
            if (stamps[k] > stamps[i] - 60'000) ++in_window;
        }
        CHECK(in_window <= 5);
    }
    CHECK(clock.total_slept() > 0);
}

namespace {

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit StubServer(httplib::Server::Handler handler) {
        server.Post("/v1/chat/completions", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
};

BackendConfig http_config(int port) {
    BackendConfig cfg;
    cfg.backend_id = "stub";
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model_name = "stub-model";
    cfg.max_retries = 4;
    cfg.api_key_env.clear();
    return cfg;
}

json ok_completion(const std::string& text) {
    return json{{"choices", json::array({json{{"message", json{{"content", text}}}}})},
                {"usage", json{{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
}

}  // namespace

TEST_CASE("http backend: 429 twice then 200 succeeds with attempt_count 3") {
    std::atomic<int> hits{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        if (++hits <= 2) {
            res.status = 429;
            return;
        }
        res.set_content(ok_completion("ham").dump(), "application/json");
    });
    FakeClock clock;
    HttpBackend backend(http_config(stub.port), clock);
    auto ex = backend.complete(classify_messages("x"));
    CHECK(ex.completion_text == "ham");
    CHECK(ex.attempt_count == 3);
    CHECK(ex.prompt_tokens == 11);
    CHECK(ex.completion_tokens == 3);
    CHECK(hits == 3);
}

TEST_CASE("http backend: 401 raises AuthError without retrying") {
    std::atomic<int> hits{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    FakeClock clock;
    HttpBackend backend(http_config(stub.port), clock);
    CHECK_THROWS_AS(backend.complete(classify_messages("x")), AuthError);
    CHECK(hits == 1);
}

TEST_CASE("http backend: retries are bounded by max_retries + 1") {
    std::atomic<int> hits{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    FakeClock clock;
    auto cfg = http_config(stub.port);
    cfg.max_retries = 2;
    HttpBackend backend(cfg, clock);
    CHECK_THROWS_AS(backend.complete(classify_messages("x")), ExhaustedRetries);
    CHECK(hits == 3);
}

TEST_CASE("http backend: unparseable body raises MalformedResponse") {
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "text/plain");
    });
    FakeClock clock;
    HttpBackend backend(http_config(stub.port), clock);
    CHECK_THROWS_AS(backend.complete(classify_messages("x")), MalformedResponse);
}

TEST_CASE("http backend: request carries model, messages, and decoding params") {
    json seen;
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(ok_completion("spam").dump(), "application/json");
    });
    FakeClock clock;
    HttpBackend backend(http_config(stub.port), clock);
    backend.complete(classify_messages("payload"), 500);
    CHECK(seen["model"] == "stub-model");
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["max_tokens"] == 500);
    REQUIRE(seen["messages"].size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][1]["role"] == "user");
}
