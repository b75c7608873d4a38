#include "lidbench/runner.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <thread>

#include "lidbench/error.hpp"

using namespace lidbench;

namespace {

const Tokenizer& cl100k() {
    static auto tok = load_tokenizer("cl100k_base");
    return *tok;
}

std::string ok_body(const std::string& text) {
    return nlohmann::json{{"model", "m-1"},
                          {"choices", {{{"message", {{"content", text}}}, {"finish_reason", "stop"}}}},
                          {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}}
        .dump();
}

// Replays scripted statuses; once the script runs out every call succeeds.
class ScriptedTransport : public ChatTransport {
public:
    explicit ScriptedTransport(std::deque<int> statuses = {}) : statuses_(std::move(statuses)) {}

    HttpResult post(const ChatRequest& request) override {
        const int now = ++in_flight_;
        int seen = max_in_flight_.load();
        while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
        }
        if (delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        ++calls;
        last_model = request.model;
        int status = 200;
        {
            std::lock_guard lock(mu_);
            if (!statuses_.empty()) {
                status = statuses_.front();
                statuses_.pop_front();
            }
        }
        --in_flight_;
        if (status == 0) return {0, "", "connection refused"};
        return {status, status == 200 ? ok_body("yes") : "{\"error\":\"x\"}", ""};
    }

    std::atomic<int> calls{0};
    std::atomic<int> max_in_flight_{0};
    int delay_ms = 0;
    std::string last_model;

private:
    std::mutex mu_;
    std::deque<int> statuses_;
    std::atomic<int> in_flight_{0};
};

BackendConfig live_config() {
    BackendConfig c;
    c.kind = BackendKind::live;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.model = "test-model";
    c.parallelism = 1;
    return c;
}

std::vector<TaskInstance> edge_instances(std::size_t n) {
    std::vector<TaskInstance> out;
    const Graph g = generate_er(80, 0.2, 3);
    Rng rng(2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto noise = sample_noise_nodes(g, 0, 1, 3, rng);
        auto t = build_edge_existence(g, 0, 1, noise, Placement::middle, Encoding::incident, cl100k());
        t.id = "edge-" + std::to_string(i);
        out.push_back(std::move(t));
    }
    return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Retry, BackoffSchedule) {
    const RetryPolicy p;
    EXPECT_DOUBLE_EQ(p.backoff_before(1), 0.0);
    EXPECT_DOUBLE_EQ(p.backoff_before(2), 1.0);
    EXPECT_DOUBLE_EQ(p.backoff_before(3), 2.0);
    EXPECT_DOUBLE_EQ(p.backoff_before(7), 30.0);
}

TEST(Backend, Validation) {
    BackendConfig c;
    EXPECT_NO_THROW(c.validate());
    c.temperature = 0.7;
    EXPECT_THROW(c.validate(), ConfigError);
    c.non_paper_mode = true;
    EXPECT_NO_THROW(c.validate());
    auto live = live_config();
    live.model.clear();
    EXPECT_THROW(live.validate(), ConfigError);
    EXPECT_EQ(c.max_tokens_for(TaskKind::similarity), 2048);
    EXPECT_EQ(c.max_tokens_for(TaskKind::edge_existence), 64);
    c.mock.degeneration_rate = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Backend, RedactedConfigHoldsNoSecret) {
    ::setenv("LIDBENCH_TEST_KEY", "sk-secret-value", 1);
    auto c = live_config();
    c.api_key_env = "LIDBENCH_TEST_KEY";
    const auto dumped = redacted(c).dump();
    EXPECT_EQ(dumped.find("sk-secret-value"), std::string::npos);
    EXPECT_NE(dumped.find("LIDBENCH_TEST_KEY"), std::string::npos);
    EXPECT_EQ(redacted(redacted(c).get<BackendConfig>()), redacted(c));
}

TEST(Backend, MissingKeyNamesVariable) {
    auto c = live_config();
    c.api_key_env = "LIDBENCH_SURELY_UNSET_KEY";
    ::unsetenv("LIDBENCH_SURELY_UNSET_KEY");
    try {
        make_live_transport(c);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("LIDBENCH_SURELY_UNSET_KEY"), std::string::npos);
    }
}

TEST(Backend, CacheKeyCoversEveryRequestField) {
    const ChatRequest base{"m", "sys", "user", 0.0, 64};
    const auto k = cache_key(base);
    EXPECT_EQ(k, cache_key(base));
    EXPECT_EQ(k.size(), 64u);
    for (auto change : {+[](ChatRequest& r) { r.model = "n"; }, +[](ChatRequest& r) { r.system = "s"; },
                        +[](ChatRequest& r) { r.user = "u"; }, +[](ChatRequest& r) { r.temperature = 0.5; },
                        +[](ChatRequest& r) { r.max_tokens = 65; }}) {
        ChatRequest r = base;
        change(r);
        EXPECT_NE(cache_key(r), k);
    }
    const auto body = request_body(base);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "user");
    EXPECT_EQ(body["max_tokens"], 64);
}

TEST(Runner, RetriesTransientFailuresWithBackoff) {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{500, 429, 0});
    Runner runner(live_config(), transport, nullptr);
    std::vector<double> waits;
    runner.set_sleeper([&](double s) { waits.push_back(s); });
    const auto responses = runner.run(edge_instances(1));
    ASSERT_EQ(responses.size(), 1u);
    EXPECT_FALSE(responses[0].error.has_value());
    EXPECT_EQ(responses[0].text, "yes");
    EXPECT_EQ(responses[0].prompt_tokens, 11);
    EXPECT_EQ(responses[0].metadata["attempts"], 4);
    EXPECT_EQ(waits, (std::vector<double>{1.0, 2.0, 4.0}));
    EXPECT_EQ(runner.stats().requests, 4u);
}

TEST(Runner, GivesUpAfterMaxAttemptsAndDoesNotCache) {
    const auto dir = fresh_dir("lidbench-runner-giveup");
    auto cache = std::make_shared<ResponseCache>(dir);
    auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{503, 503, 503, 503, 503});
    Runner runner(live_config(), transport, cache);
    runner.set_sleeper([](double) {});
    const auto responses = runner.run(edge_instances(1));
    EXPECT_EQ(responses[0].error, "HTTP 503");
    EXPECT_EQ(transport->calls, 5);
    EXPECT_EQ(runner.stats().errors, 1u);
    EXPECT_FALSE(std::filesystem::exists(dir) && !std::filesystem::is_empty(dir));
}

TEST(Runner, ClientErrorsAreNotRetried) {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{400});
    Runner runner(live_config(), transport, nullptr);
    runner.set_sleeper([](double) {});
    EXPECT_EQ(runner.run(edge_instances(1))[0].error, "HTTP 400");
    EXPECT_EQ(transport->calls, 1);
}

TEST(Runner, AuthFailureAborts) {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{401});
    Runner runner(live_config(), transport, nullptr);
    EXPECT_THROW(runner.run(edge_instances(3)), AuthError);
}

TEST(Runner, ParallelismIsBounded) {
    auto transport = std::make_shared<ScriptedTransport>();
    transport->delay_ms = 20;
    auto c = live_config();
    c.parallelism = 3;
    Runner runner(c, transport, nullptr);
    const auto instances = edge_instances(12);
    const auto responses = runner.run(instances);
    ASSERT_EQ(responses.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(responses[i].instance_id, instances[i].id);
    EXPECT_LE(transport->max_in_flight_.load(), 3);
    EXPECT_GE(transport->max_in_flight_.load(), 2);
}

TEST(Runner, SecondRunIsServedFromCache) {
    const auto dir = fresh_dir("lidbench-runner-cache");
    auto cache = std::make_shared<ResponseCache>(dir);
    auto transport = std::make_shared<ScriptedTransport>();
    const auto instances = edge_instances(4);
    Runner first(live_config(), transport, cache);
    const auto a = first.run(instances);
    EXPECT_EQ(transport->calls, 4);
    Runner second(live_config(), transport, cache);
    const auto b = second.run(instances);
    EXPECT_EQ(transport->calls, 4);
    EXPECT_EQ(second.stats().cache_hits, 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].text, b[i].text);
        EXPECT_TRUE(b[i].cache_hit);
    }
    std::filesystem::remove_all(dir);
}

TEST(Runner, CorruptCacheEntryIsAMiss) {
    const auto dir = fresh_dir("lidbench-runner-corrupt");
    ResponseCache cache(dir);
    cache.put("abcdef", {{"text", "yes"}});
    EXPECT_EQ(cache.get("abcdef")->value("text", ""), "yes");
    std::ofstream(dir / "ab" / "abcdef.json") << "{not json";
    EXPECT_FALSE(cache.get("abcdef").has_value());
    EXPECT_FALSE(cache.get("ffff").has_value());
    std::filesystem::remove_all(dir);
}

TEST(Runner, RequestLogRecordsEveryAttempt) {
    const auto dir = fresh_dir("lidbench-runner-log");
    auto log = std::make_shared<RequestLog>(dir / "requests.jsonl");
    auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{500});
    Runner runner(live_config(), transport, nullptr, log);
    runner.set_sleeper([](double) {});
    runner.run(edge_instances(1));
    std::ifstream in(dir / "requests.jsonl");
    std::string line;
    std::vector<nlohmann::json> records;
    while (std::getline(in, line)) records.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0]["status"], 500);
    EXPECT_EQ(records[1]["attempt"], 2);
    std::filesystem::remove_all(dir);
}

TEST(RateLimiter, SpacesRequests) {
    RateLimiter limiter(1200.0, 1.0);  // one token every 50 ms
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) limiter.acquire();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(elapsed, 0.19);
}

TEST(HttpTransport, TalksToAnOpenAiStyleServer) {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        if (hits++ == 0) {
            res.status = 429;
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(ok_body("model " + body["model"].get<std::string>()), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto c = live_config();
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    auto transport = std::make_shared<HttpTransport>(c.endpoint, "k-123", 5.0);
    Runner runner(c, transport, nullptr);
    runner.set_sleeper([](double) {});
    const auto responses = runner.run(edge_instances(1));
    server.stop();
    thread.join();

    ASSERT_FALSE(responses[0].error.has_value()) << *responses[0].error;
    EXPECT_EQ(responses[0].text, "model test-model");
    EXPECT_EQ(auth, "Bearer k-123");
    EXPECT_EQ(hits, 2);
}

TEST(HttpTransport, UnreachableServerIsATransportError) {
    HttpTransport transport("http://127.0.0.1:1/v1/chat/completions", "k", 1.0);
    const auto res = transport.post({"m", "s", "u", 0.0, 8});
    EXPECT_EQ(res.status, 0);
    EXPECT_FALSE(res.transport_error.empty());
}

TEST(Mock, DeterministicPerInstance) {
    MockModel m;
    m.planted_G = PiecewiseLinear({{0.0, 0.3}, {1.0, 0.3}});
    m.seed = 5;
    const auto instances = edge_instances(20);
    for (const auto& t : instances) EXPECT_EQ(mock_answer(t, m, 64), mock_answer(t, m, 64));
    MockModel other = m;
    other.seed = 6;
    EXPECT_NE(m.fingerprint(), other.fingerprint());
    const nlohmann::json j = m;
    EXPECT_EQ(j.get<MockModel>().fingerprint(), m.fingerprint());
}

TEST(Mock, SuccessProbabilityComposesPlantedFactors) {
    MockModel m;
    m.planted_G = PiecewiseLinear({{0.0, 1.0}, {1.0, 0.5}});
    m.planted_H = PiecewiseLinear({{0.0, 1.0}, {1.0, 0.0}});
    m.planted_gamma = 0.8;
    TaskInstance t;
    t.task = TaskKind::edge_existence;
    t.positions = {0.5};
    EXPECT_DOUBLE_EQ(mock_success_probability(t, m), 0.75);
    t.task = TaskKind::common_connection;
    t.positions = {0.2, 0.7};
    EXPECT_DOUBLE_EQ(mock_success_probability(t, m), 0.8 * 0.9 * 0.65 * 0.5);
    t.positions = {0.2};
    EXPECT_THROW(mock_success_probability(t, m), ParameterError);
}

TEST(Mock, AnswersFollowPlantedAccuracy) {
    MockModel m;
    m.planted_G = PiecewiseLinear::constant(0.7);
    m.seed = 1;
    auto instances = edge_instances(1);
    int correct = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        auto t = instances[0];
        t.id = "id-" + std::to_string(i);
        const auto text = mock_answer(t, m, 64);
        const bool said = text.ends_with("yes");
        correct += said == (t.ground_truth != 0);
    }
    EXPECT_NEAR(correct / static_cast<double>(n), 0.7, 4 * std::sqrt(0.21 / n));
}

TEST(Mock, DegenerateOutputRepeats) {
    MockModel m;
    m.degeneration_rate = 1.0;
    const auto t = edge_instances(1)[0];
    const auto text = mock_answer(t, m, 200);
    EXPECT_EQ(std::count(text.begin(), text.end(), '.'), 20);
}
