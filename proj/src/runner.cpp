#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "lidbench/runner.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"
#include "lidbench/rng.hpp"

namespace lidbench {

std::string_view to_string(BackendKind kind) { return kind == BackendKind::live ? "live" : "mock"; }

BackendKind backend_kind_from_string(std::string_view name) {
    if (name == "live") return BackendKind::live;
    if (name == "mock") return BackendKind::mock;
    throw ConfigError("backend.kind must be \"live\" or \"mock\", got \"" + std::string(name) + "\"");
}

double RetryPolicy::backoff_before(int attempt) const {
    if (attempt <= 1) return 0.0;
    const double wait = initial_backoff_s * std::pow(backoff_multiplier, attempt - 2);
    return std::min(wait, max_backoff_s);
}

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::string bad;
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + where + "." + k;
    }
    if (!bad.empty()) throw ConfigError("unknown configuration keys: " + bad);
}

void check_probability(const PiecewiseLinear& f, const std::string& name) {
    for (const auto& [x, y] : f.knots()) {
        if (y < 0.0 || y > 1.0) throw ConfigError("mock." + name + " values must lie in [0, 1]");
    }
}

}  // namespace

void MockModel::validate() const {
    check_probability(planted_G, "G");
    check_probability(planted_H, "H");
    if (planted_gamma < 0.0 || planted_gamma > 1.0) throw ConfigError("mock.gamma must lie in [0, 1]");
    if (degeneration_rate < 0.0 || degeneration_rate > 1.0) {
        throw ConfigError("mock.degeneration_rate must lie in [0, 1]");
    }
}

std::string MockModel::fingerprint() const {
    return sha256_hex(nlohmann::json(*this).dump()).substr(0, 16);
}

void to_json(nlohmann::json& j, const MockModel& m) {
    j = {{"seed", m.seed},
         {"gamma", m.planted_gamma},
         {"degeneration_rate", m.degeneration_rate},
         {"G", m.planted_G},
         {"H", m.planted_H}};
}

void from_json(const nlohmann::json& j, MockModel& m) {
    check_keys(j, {"seed", "gamma", "degeneration_rate", "G", "H"}, "mock");
    m = MockModel{};
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("gamma")) m.planted_gamma = j["gamma"].get<double>();
    if (j.contains("degeneration_rate")) m.degeneration_rate = j["degeneration_rate"].get<double>();
    if (j.contains("G")) m.planted_G = j["G"].get<PiecewiseLinear>();
    if (j.contains("H")) m.planted_H = j["H"].get<PiecewiseLinear>();
    m.validate();
}

void BackendConfig::validate() const {
    if (temperature != 0.0 && !non_paper_mode) {
        throw ConfigError("backend.temperature must be 0 unless backend.non_paper_mode is set");
    }
    if (kind == BackendKind::live) {
        if (endpoint.empty()) throw ConfigError("backend.endpoint is required for a live backend");
        if (model.empty()) throw ConfigError("backend.model is required for a live backend");
        if (api_key_env.empty()) throw ConfigError("backend.api_key_env is required for a live backend");
    }
    if (max_output_tokens && *max_output_tokens <= 0) throw ConfigError("backend.max_output_tokens must be positive");
    if (parallelism == 0) throw ConfigError("backend.parallelism must be at least 1");
    if (retry.max_attempts < 1) throw ConfigError("backend.retry.max_attempts must be at least 1");
    if (requests_per_minute < 0.0) throw ConfigError("backend.requests_per_minute must not be negative");
    if (timeout_s <= 0.0) throw ConfigError("backend.timeout_s must be positive");
    mock.validate();
}

int BackendConfig::max_tokens_for(TaskKind task) const {
    if (max_output_tokens) return *max_output_tokens;
    return uses_cot(task) ? 2048 : 64;
}

std::string BackendConfig::effective_model() const {
    return kind == BackendKind::mock ? "mock:" + mock.fingerprint() : model;
}

nlohmann::json redacted(const BackendConfig& c) {
    nlohmann::json j = {
        {"kind", to_string(c.kind)},
        {"model", c.effective_model()},
        {"temperature", c.temperature},
        {"non_paper_mode", c.non_paper_mode},
        {"max_output_tokens", c.max_output_tokens ? nlohmann::json(*c.max_output_tokens) : nlohmann::json()},
        {"retry",
         {{"max_attempts", c.retry.max_attempts},
          {"initial_backoff_s", c.retry.initial_backoff_s},
          {"backoff_multiplier", c.retry.backoff_multiplier},
          {"max_backoff_s", c.retry.max_backoff_s}}},
        {"requests_per_minute", c.requests_per_minute},
        {"parallelism", c.parallelism},
        {"timeout_s", c.timeout_s},
    };
    if (c.kind == BackendKind::live) {
        j["endpoint"] = c.endpoint;
        j["api_key_env"] = c.api_key_env;
    } else {
        j["mock"] = c.mock;
    }
    return j;
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
    check_keys(j,
               {"kind", "endpoint", "model", "api_key_env", "temperature", "non_paper_mode",
                "max_output_tokens", "timeout_s", "retry", "requests_per_minute", "parallelism"},
               "backend");
    c.kind = backend_kind_from_string(j.value("kind", std::string("mock")));
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.non_paper_mode = j.value("non_paper_mode", c.non_paper_mode);
    if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
        c.max_output_tokens = j["max_output_tokens"].get<int>();
    }
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        check_keys(r, {"max_attempts", "initial_backoff_s", "backoff_multiplier", "max_backoff_s"},
                   "backend.retry");
        c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
        c.retry.initial_backoff_s = r.value("initial_backoff_s", c.retry.initial_backoff_s);
        c.retry.backoff_multiplier = r.value("backoff_multiplier", c.retry.backoff_multiplier);
        c.retry.max_backoff_s = r.value("max_backoff_s", c.retry.max_backoff_s);
    }
    c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
    c.parallelism = j.value("parallelism", c.parallelism);
}

void to_json(nlohmann::json& j, const ModelResponse& r) {
    j = {{"id", r.instance_id},
         {"text", r.text},
         {"latency_s", r.latency_s},
         {"prompt_tokens", r.prompt_tokens},
         {"completion_tokens", r.completion_tokens},
         {"metadata", r.metadata},
         {"cache_hit", r.cache_hit}};
    if (r.error) j["error"] = *r.error;
}

void from_json(const nlohmann::json& j, ModelResponse& r) {
    r = ModelResponse{};
    r.instance_id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.latency_s = j.value("latency_s", 0.0);
    r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    r.metadata = j.value("metadata", nlohmann::json::object());
    r.cache_hit = j.value("cache_hit", false);
    if (j.contains("error")) r.error = j["error"].get<std::string>();
}

nlohmann::json request_body(const ChatRequest& request) {
    return {{"model", request.model},
            {"messages",
             {{{"role", "system"}, {"content", request.system}},
              {{"role", "user"}, {"content", request.user}}}},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
}

std::string cache_key(const ChatRequest& request) {
    const nlohmann::json key = {request.model, request.system, request.user, request.temperature,
                                request.max_tokens};
    return sha256_hex(key.dump());
}

// ---------------------------------------------------------------------------
// Transport, cache, rate limiting, logging

HttpTransport::HttpTransport(std::string endpoint, std::string api_key, double timeout_s)
    : api_key_(std::move(api_key)), timeout_s_(timeout_s) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("backend.endpoint must be an http(s) URL: " + endpoint);
    const auto slash = endpoint.find('/', scheme + 3);
    base_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

HttpResult HttpTransport::post(const ChatRequest& request) {
    httplib::Client client(base_);
    const auto secs = static_cast<time_t>(timeout_s_);
    const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);
    auto res = client.Post(path_, request_body(request).dump(), "application/json");
    HttpResult out;
    if (!res) {
        out.transport_error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

std::shared_ptr<ChatTransport> make_live_transport(const BackendConfig& config) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) {
        throw ConfigError("environment variable " + config.api_key_env +
                          " (backend.api_key_env) is not set");
    }
    return std::make_shared<HttpTransport>(config.endpoint, key, config.timeout_s);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& key) const {
    const auto path = path_for(key);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;  // torn or foreign file: treat as a miss
    }
}

void ResponseCache::put(const std::string& key, const nlohmann::json& entry) const {
    write_file_atomic(path_for(key), entry.dump() + "\n");
}

RateLimiter::RateLimiter(double requests_per_minute, double burst)
    : rate_per_s_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    for (;;) {
        double wait_s = 0.0;
        {
            std::lock_guard lock(mu_);
            const auto now = std::chrono::steady_clock::now();
            const double elapsed = std::chrono::duration<double>(now - last_).count();
            last_ = now;
            tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_s_);
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait_s = (1.0 - tokens_) / rate_per_s_;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
    }
}

RequestLog::RequestLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RequestLog::write(const nlohmann::json& record) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << record.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Mock model

double mock_success_probability(const TaskInstance& t, const MockModel& m) {
    const auto& G = m.planted_G;
    const auto& H = m.planted_H;
    const auto& p = t.positions;
    double f = 0.0;
    switch (t.task) {
        case TaskKind::edge_existence:
            if (p.size() != 1) throw ParameterError("edge existence instance needs one position");
            f = G(p[0]);
            break;
        case TaskKind::common_connection:
            if (p.size() != 2) throw ParameterError("common connection instance needs two positions");
            f = m.planted_gamma * G(p[0]) * G(p[1]) * H(std::abs(p[1] - p[0]));
            break;
        case TaskKind::similarity: {
            // Two chained retrievals through the source block: positions of all
            // three blocks, and each pair's median distance over prompt length.
            if (p.size() != 3 || t.median_distances.size() != 2 || t.prompt_tokens == 0) {
                throw ParameterError("similarity instance lacks positions or distances");
            }
            const double len = static_cast<double>(t.prompt_tokens);
            f = m.planted_gamma * G(p[0]) * G(p[1]) * G(p[2]) *
                H(static_cast<double>(t.median_distances[0]) / len) *
                H(static_cast<double>(t.median_distances[1]) / len);
            break;
        }
    }
    return std::clamp(f, 0.0, 1.0);
}

namespace {

std::string yes_no(bool v) { return v ? "yes" : "no"; }

std::string repeated(const std::string& sentence, int max_tokens) {
    const int times = std::max(10, max_tokens / 10);
    std::string out;
    for (int i = 0; i < times; ++i) {
        if (i) out += ' ';
        out += sentence;
    }
    return out;
}

std::string count_lines(const TaskInstance& t, std::int64_t ij, std::int64_t jk) {
    const auto n = [](NodeId v) { return "node " + std::to_string(v); };
    return "Number of common connections between " + n(t.nodes[0]) + " and " + n(t.nodes[1]) +
           ": " + std::to_string(ij) + "\nNumber of common connections between " + n(t.nodes[1]) +
           " and " + n(t.nodes[2]) + ": " + std::to_string(jk) + "\n";
}

}  // namespace

std::string mock_answer(const TaskInstance& t, const MockModel& m, int max_tokens) {
    Rng rng(mix_seed(m.seed, hash_label(t.id)));
    const bool degenerate = rng.uniform() < m.degeneration_rate;
    const bool correct = rng.uniform() < mock_success_probability(t, m);

    if (t.task != TaskKind::similarity) {
        if (degenerate) {
            return repeated("Let me look at the edge list of node " + std::to_string(t.nodes[0]) + " again.",
                            max_tokens);
        }
        if (t.task == TaskKind::edge_existence) {
            const bool said = correct ? t.ground_truth != 0 : t.ground_truth == 0;
            return "Checking the edges listed for node " + std::to_string(t.nodes[0]) + ".\n" + yes_no(said);
        }
        std::int64_t said = t.ground_truth;
        if (!correct) said = (t.ground_truth > 0 && rng.below(2) == 0) ? t.ground_truth - 1 : t.ground_truth + 1;
        return "Counting the shared neighbors.\n" + std::to_string(said);
    }

    if (!t.question_template || t.nodes.size() != 3) throw ParameterError("similarity instance lacks provenance");
    const auto blocks = similarity_block_neighbors(t);
    std::vector<NodeId> c1, c2;
    std::set_intersection(blocks[0].begin(), blocks[0].end(), blocks[1].begin(), blocks[1].end(),
                          std::back_inserter(c1));
    std::set_intersection(blocks[1].begin(), blocks[1].end(), blocks[2].begin(), blocks[2].end(),
                          std::back_inserter(c2));
    const auto ij = static_cast<std::int64_t>(c1.size());
    const auto jk = static_cast<std::int64_t>(c2.size());
    const auto tmpl = *t.question_template;
    const bool truth = similarity_answer(c1.size(), c2.size(), tmpl);
    const std::string intro = "I compare the neighbor lists of each pair step by step.\n";

    if (degenerate) {
        if (rng.below(2) == 0) {
            return repeated("I need to compare the neighbors of node " + std::to_string(t.nodes[1]) + " again.",
                            max_tokens);
        }
        return intro + count_lines(t, ij, jk) + "Final answer: " + yes_no(!truth);
    }
    if (correct) return intro + count_lines(t, ij, jk) + "Final answer: " + yes_no(truth);

    // A wrong but self-consistent derivation: keep the first count and move
    // the second just enough to flip the comparison.
    for (std::int64_t cand : {ij + 1, ij, ij - 1}) {
        if (cand < 0 || cand == jk) continue;
        if (similarity_answer(static_cast<std::size_t>(ij), static_cast<std::size_t>(cand), tmpl) != truth) {
            return intro + count_lines(t, ij, cand) + "Final answer: " + yes_no(!truth);
        }
    }
    return intro + count_lines(t, ij, jk) + "Final answer: " + yes_no(!truth);
}

// ---------------------------------------------------------------------------
// Runner

Runner::Runner(BackendConfig config, std::shared_ptr<ChatTransport> transport,
               std::shared_ptr<const ResponseCache> cache, std::shared_ptr<RequestLog> log)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      log_(std::move(log)),
      sleep_([](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); }) {
    config_.validate();
    if (config_.kind == BackendKind::live && !transport_) throw ConfigError("live backend needs a transport");
    if (config_.kind == BackendKind::live && config_.requests_per_minute > 0.0) {
        limiter_ = std::make_unique<RateLimiter>(config_.requests_per_minute,
                                                 static_cast<double>(config_.parallelism));
    }
}

std::vector<ModelResponse> Runner::run(std::span<const TaskInstance> instances) {
    std::vector<ModelResponse> out(instances.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= instances.size() || abort_) return;
            try {
                out[i] = run_one(instances[i]);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                abort_ = true;
                return;
            }
        }
    };
    const std::size_t threads = std::min(config_.parallelism, std::max<std::size_t>(1, instances.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

ModelResponse Runner::run_one(const TaskInstance& instance) {
    ChatRequest request{config_.effective_model(), instance.system_prompt, instance.prompt,
                        config_.temperature, config_.max_tokens_for(instance.task)};
    const std::string key = cache_key(request);

    if (cache_) {
        if (auto entry = cache_->get(key)) {
            ModelResponse r;
            r.instance_id = instance.id;
            r.text = entry->value("text", "");
            r.prompt_tokens = entry->value("prompt_tokens", std::int64_t{0});
            r.completion_tokens = entry->value("completion_tokens", std::int64_t{0});
            r.metadata = entry->value("metadata", nlohmann::json::object());
            r.cache_hit = true;
            std::lock_guard lock(stats_mu_);
            ++stats_.cache_hits;
            return r;
        }
    }

    ModelResponse r;
    nlohmann::json raw_body;
    if (config_.kind == BackendKind::mock) {
        r.instance_id = instance.id;
        r.text = mock_answer(instance, config_.mock, request.max_tokens);
        r.prompt_tokens = static_cast<std::int64_t>(instance.input_tokens);
        r.metadata = {{"model", request.model}};
        if (log_) log_->write({{"id", instance.id}, {"model", request.model}, {"cache_key", key}});
        std::lock_guard lock(stats_mu_);
        ++stats_.requests;
    } else {
        r = call_live(instance, request);
        if (r.error) {
            std::lock_guard lock(stats_mu_);
            ++stats_.errors;
            return r;  // failures are never cached
        }
        raw_body = r.metadata.value("raw_body", nlohmann::json());
        r.metadata.erase("raw_body");
    }

    if (cache_) {
        cache_->put(key, {{"model", request.model},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_tokens},
                          {"prompt_sha256", sha256_hex(request.system + "\n" + request.user)},
                          {"text", r.text},
                          {"prompt_tokens", r.prompt_tokens},
                          {"completion_tokens", r.completion_tokens},
                          {"metadata", r.metadata},
                          {"raw_body", raw_body}});
    }
    return r;
}

ModelResponse Runner::call_live(const TaskInstance& instance, const ChatRequest& request) {
    ModelResponse r;
    r.instance_id = instance.id;
    std::string last_problem;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (abort_) {
            r.error = "run aborted";
            return r;
        }
        if (attempt > 1) sleep_(config_.retry.backoff_before(attempt));
        if (limiter_) limiter_->acquire();
        const auto t0 = std::chrono::steady_clock::now();
        const HttpResult res = transport_->post(request);
        const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        {
            std::lock_guard lock(stats_mu_);
            ++stats_.requests;
        }
        if (log_) {
            log_->write({{"id", instance.id},
                         {"attempt", attempt},
                         {"status", res.status},
                         {"latency_s", latency},
                         {"request", request_body(request)},
                         {"response", res.body},
                         {"transport_error", res.transport_error}});
        }
        if (res.status == 401 || res.status == 403) {
            abort_ = true;
            throw AuthError("backend rejected credentials (HTTP " + std::to_string(res.status) + ")");
        }
        if (res.status == 200) {
            try {
                const auto body = nlohmann::json::parse(res.body);
                const auto& choice = body.at("choices").at(0);
                const auto& content = choice.at("message").at("content");
                r.text = content.is_string() ? content.get<std::string>() : "";
                if (body.contains("usage") && body["usage"].is_object()) {
                    r.prompt_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
                    r.completion_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
                }
                r.latency_s = latency;
                r.metadata = {{"model", body.value("model", request.model)},
                              {"finish_reason", choice.value("finish_reason", nlohmann::json())},
                              {"attempts", attempt},
                              {"raw_body", res.body}};
                return r;
            } catch (const nlohmann::json::exception& e) {
                last_problem = std::string("malformed response body: ") + e.what();
                continue;
            }
        }
        last_problem = res.status == 0 ? "transport error: " + res.transport_error
                                       : "HTTP " + std::to_string(res.status);
        const bool transient = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
        if (!transient) break;
    }
    r.error = last_problem;
    return r;
}

}  // namespace lidbench
