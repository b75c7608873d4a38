#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/stats.hpp"
#include "lidbench/task.hpp"

namespace lidbench {

enum class BackendKind { live, mock };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct RetryPolicy {
    int max_attempts = 5;
    double initial_backoff_s = 1.0;
    double backoff_multiplier = 2.0;
    double max_backoff_s = 30.0;

    /// Sleep before attempt `attempt` (1-based; attempt 1 never waits).
    double backoff_before(int attempt) const;
};

/// Planted degradation for the offline mock. G and H are probabilities in
/// [0, 1]; G takes a normalized position, H a normalized distance.
struct MockModel {
    PiecewiseLinear planted_G = PiecewiseLinear::constant(1.0);
    PiecewiseLinear planted_H = PiecewiseLinear::constant(1.0);
    double planted_gamma = 1.0;
    double degeneration_rate = 0.0;
    std::uint64_t seed = 0;

    /// Throws ConfigError when a probability leaves [0, 1].
    void validate() const;
    /// Short content hash; part of the mock's model name so cached responses
    /// never cross parameter changes.
    std::string fingerprint() const;
};

void to_json(nlohmann::json& j, const MockModel& m);
void from_json(const nlohmann::json& j, MockModel& m);

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    /// Full chat-completions URL, e.g. https://api.openai.com/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Name of the environment variable holding the API key.
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    /// Allows temperature != 0.
    bool non_paper_mode = false;
    /// Overrides the per-task defaults (2048 with chain-of-thought, else 64).
    std::optional<int> max_output_tokens;
    double timeout_s = 120.0;
    RetryPolicy retry;
    /// 0 disables rate limiting.
    double requests_per_minute = 0.0;
    std::size_t parallelism = 4;
    MockModel mock;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    int max_tokens_for(TaskKind task) const;
    /// Model name used in cache keys and manifests.
    std::string effective_model() const;
};

/// Secrets never appear here: the key is referenced by variable name only.
nlohmann::json redacted(const BackendConfig& config);
void from_json(const nlohmann::json& j, BackendConfig& c);

struct ModelResponse {
    std::string instance_id;
    std::string text;
    double latency_s = 0.0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    nlohmann::json metadata = nlohmann::json::object();
    bool cache_hit = false;
    /// Set when every attempt failed; text is then empty.
    std::optional<std::string> error;
};

void to_json(nlohmann::json& j, const ModelResponse& r);
void from_json(const nlohmann::json& j, ModelResponse& r);

struct ChatRequest {
    std::string model;
    std::string system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 0;
};

/// OpenAI-style request body.
nlohmann::json request_body(const ChatRequest& request);

/// sha256 over (model, system, prompt, temperature, max tokens).
std::string cache_key(const ChatRequest& request);

struct HttpResult {
    /// 0 when the request never produced an HTTP status (connection error).
    int status = 0;
    std::string body;
    std::string transport_error;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual HttpResult post(const ChatRequest& request) = 0;
};

/// Live transport over cpp-httplib (TLS via OpenSSL).
class HttpTransport final : public ChatTransport {
public:
    HttpTransport(std::string endpoint, std::string api_key, double timeout_s);
    HttpResult post(const ChatRequest& request) override;

private:
    std::string base_;
    std::string path_;
    std::string api_key_;
    double timeout_s_;
};

/// On-disk response store: <dir>/<key[0:2]>/<key>.json, written atomically.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::optional<nlohmann::json> get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::json& entry) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;
    std::filesystem::path dir_;
};

/// Token bucket: capacity `burst`, refilled at rate/60 tokens per second.
class RateLimiter {
public:
    RateLimiter(double requests_per_minute, double burst);
    void acquire();

private:
    std::mutex mu_;
    double rate_per_s_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

/// Append-only JSON-lines log shared by worker threads.
class RequestLog {
public:
    explicit RequestLog(std::filesystem::path path);
    void write(const nlohmann::json& record);

private:
    std::mutex mu_;
    std::filesystem::path path_;
};

/// Deterministic answer of the planted mock for one instance.
std::string mock_answer(const TaskInstance& instance, const MockModel& mock, int max_tokens);

/// Probability that the mock answers correctly when it does not degenerate.
double mock_success_probability(const TaskInstance& instance, const MockModel& mock);

struct RunStats {
    std::size_t requests = 0;  // backend calls (mock answers or HTTP attempts)
    std::size_t cache_hits = 0;
    std::size_t errors = 0;
};

class Runner {
public:
    /// `transport` may be null for the mock backend; `cache` and `log` are optional.
    Runner(BackendConfig config, std::shared_ptr<ChatTransport> transport,
           std::shared_ptr<const ResponseCache> cache, std::shared_ptr<RequestLog> log = nullptr);

    /// One response per instance, in input order. Throws AuthError on 401/403.
    std::vector<ModelResponse> run(std::span<const TaskInstance> instances);

    const RunStats& stats() const { return stats_; }

    /// Replaces the sleep used between retries (tests).
    void set_sleeper(std::function<void(double)> sleeper) { sleep_ = std::move(sleeper); }

private:
    ModelResponse run_one(const TaskInstance& instance);
    ModelResponse call_live(const TaskInstance& instance, const ChatRequest& request);

    BackendConfig config_;
    std::shared_ptr<ChatTransport> transport_;
    std::shared_ptr<const ResponseCache> cache_;
    std::shared_ptr<RequestLog> log_;
    std::unique_ptr<RateLimiter> limiter_;
    std::function<void(double)> sleep_;
    std::atomic<bool> abort_{false};
    std::mutex stats_mu_;
    RunStats stats_;
};

/// Builds the live transport from the config, reading the key from the
/// environment. Throws ConfigError naming the variable when it is unset.
std::shared_ptr<ChatTransport> make_live_transport(const BackendConfig& config);

}  // namespace lidbench
