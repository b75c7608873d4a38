#include "lidbench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"
#include "lidbench/report.hpp"
#include "lidbench/rng.hpp"

namespace lidbench {

namespace fs = std::filesystem;
using nlohmann::json;

CorpusSpec RunConfig::corpus_spec(TaskKind task, Encoding encoding) const {
    CorpusSpec s;
    s.task = task;
    s.encoding = encoding;
    s.node_count = node_count;
    s.density = density;
    // Shared across encodings so edge-existence and common-connection corpora
    // use the same graphs and node pairs for every encoding.
    s.seed = mix_seed(seed, hash_label(to_string(task)));
    s.samples_per_graph = samples_per_graph;
    s.per_cell = quota.at(task);
    s.noise_count = noise_count;
    s.min_degree = min_degree;
    s.max_attempts = max_attempts;
    s.thresholds = thresholds.at(encoding);
    return s;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"", {"task", "tasks", "encoding", "encodings", "graph", "tokenizer", "quota", "noise_count", "min_degree",
              "max_attempts", "thresholds", "backend", "mock", "score", "fit"}},
        {"graph", {"node_count", "density", "seed", "samples_per_graph"}},
        {"backend", {"kind", "endpoint", "model", "api_key_env", "temperature", "non_paper_mode",
                     "max_output_tokens", "timeout_s", "retry", "requests_per_minute", "parallelism"}},
        {"backend.retry", {"max_attempts", "initial_backoff_s", "backoff_multiplier", "max_backoff_s"}},
        {"mock", {"seed", "gamma", "degeneration_rate", "G", "H"}},
        {"score", {"bootstrap_resamples", "seed", "repetition_threshold"}},
        {"fit", {"split_seed", "min_class_cells", "floor", "bootstrap_resamples", "bootstrap_seed"}},
        {"quota", {"edge_existence", "common_connection", "similarity"}},
        {"thresholds", {"incident", "adjacency", "expert"}},
        {"thresholds.*", {"small_max", "medium_max"}},
    };
    return s;
}

void collect_unknown(const json& j, const std::string& path, std::vector<std::string>& bad) {
    if (!j.is_object()) return;
    const auto& s = schema();
    auto it = s.find(path);
    if (it == s.end()) return;
    for (const auto& [k, v] : j.items()) {
        const std::string child = path.empty() ? k : path + "." + k;
        if (!it->second.count(k)) {
            bad.push_back(child);
            continue;
        }
        if (path == "thresholds") {
            if (v.is_object()) {
                for (const auto& [kk, vv] : v.items()) {
                    if (!s.at("thresholds.*").count(kk)) bad.push_back(child + "." + kk);
                }
            }
        } else {
            collect_unknown(v, child, bad);
        }
    }
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid value for " + (path.empty() ? key : path + "." + key) + ": " + e.what());
    }
}

std::vector<std::string> names_of(const json& j, const std::string& key) {
    if (j.is_string()) return {j.get<std::string>()};
    if (j.is_array()) {
        std::vector<std::string> out;
        for (const auto& v : j) {
            if (!v.is_string()) throw ConfigError(key + " entries must be strings");
            out.push_back(v.get<std::string>());
        }
        return out;
    }
    throw ConfigError(key + " must be a string or a list of strings");
}

template <class E, class F>
std::vector<E> parse_list(const json& j, const std::string& single, const std::string& plural, std::vector<E> dflt,
                          F from_string) {
    if (j.contains(single) && j.contains(plural)) throw ConfigError("give either " + single + " or " + plural);
    const std::string key = j.contains(single) ? single : plural;
    if (!j.contains(key)) return dflt;
    std::vector<E> out;
    for (const auto& name : names_of(j[key], key)) {
        try {
            const E e = from_string(name);
            if (std::find(out.begin(), out.end(), e) != out.end()) throw ConfigError(key + " lists '" + name + "' twice");
            out.push_back(e);
        } catch (const ParameterError& err) {
            throw ConfigError(key + ": " + err.what());
        }
    }
    if (out.empty()) throw ConfigError(key + " must not be empty");
    return out;
}

}  // namespace

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    std::vector<std::string> bad;
    collect_unknown(j, "", bad);
    if (!bad.empty()) {
        std::string msg = "unknown configuration keys:";
        for (const auto& b : bad) msg += " " + b;
        throw ConfigError(msg);
    }

    RunConfig c;
    c.tasks = parse_list<TaskKind>(j, "task", "tasks", c.tasks, task_from_string);
    c.encodings = parse_list<Encoding>(j, "encoding", "encodings", c.encodings, encoding_from_string);

    const json graph = j.value("graph", json::object());
    c.node_count = get(graph, "node_count", "graph", c.node_count);
    c.density = get(graph, "density", "graph", c.density);
    c.seed = get(graph, "seed", "graph", c.seed);
    c.samples_per_graph = get(graph, "samples_per_graph", "graph", c.samples_per_graph);
    if (c.node_count < 2) throw ConfigError("graph.node_count must be at least 2");
    if (!(c.density >= 0.0 && c.density <= 1.0)) throw ConfigError("graph.density must lie in [0, 1]");
    if (c.samples_per_graph == 0) throw ConfigError("graph.samples_per_graph must be positive");

    c.tokenizer = get(j, "tokenizer", "", c.tokenizer);
    if (j.contains("quota")) {
        const auto& q = j["quota"];
        if (q.is_number_unsigned() || q.is_number_integer()) {
            const auto n = get<std::size_t>(j, "quota", "", 0);
            for (auto& [task, v] : c.quota) v = n;
        } else if (q.is_object()) {
            for (auto t : kAllTasks) c.quota[t] = get(q, std::string(to_string(t)), "quota", c.quota[t]);
        } else {
            throw ConfigError("quota must be a positive integer or an object keyed by task");
        }
    }
    for (const auto& [task, n] : c.quota) {
        if (n == 0) throw ConfigError("quota." + std::string(to_string(task)) + " must be positive");
    }
    if (c.quota[TaskKind::similarity] % 2 != 0) {
        throw ConfigError("quota.similarity must be even (half yes, half no per cell)");
    }
    c.noise_count = get(j, "noise_count", "", c.noise_count);
    c.min_degree = get(j, "min_degree", "", c.min_degree);
    c.max_attempts = get(j, "max_attempts", "", c.max_attempts);
    if (c.max_attempts == 0) throw ConfigError("max_attempts must be positive");

    if (j.contains("thresholds")) {
        for (auto e : kAllEncodings) {
            const std::string name(to_string(e));
            if (!j["thresholds"].contains(name)) continue;
            const auto& t = j["thresholds"][name];
            auto& th = c.thresholds[e];
            th.small_max = get(t, "small_max", "thresholds." + name, th.small_max);
            th.medium_max = get(t, "medium_max", "thresholds." + name, th.medium_max);
            if (th.small_max >= th.medium_max) {
                throw ConfigError("thresholds." + name + ".small_max must be below medium_max");
            }
        }
    }

    try {
        if (j.contains("backend")) c.backend = j["backend"].get<BackendConfig>();
        if (j.contains("mock")) c.backend.mock = j["mock"].get<MockModel>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid backend or mock settings: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("invalid backend or mock settings: ") + e.what());
    }
    c.backend.validate();

    const json score = j.value("score", json::object());
    c.score.bootstrap_resamples = get(score, "bootstrap_resamples", "score", c.score.bootstrap_resamples);
    c.score.seed = get(score, "seed", "score", c.score.seed);
    c.parse.repetition_threshold = get(score, "repetition_threshold", "score", c.parse.repetition_threshold);
    if (c.parse.repetition_threshold < 2) throw ConfigError("score.repetition_threshold must be at least 2");

    const json fit = j.value("fit", json::object());
    c.fit.split_seed = get(fit, "split_seed", "fit", c.fit.split_seed);
    c.fit.min_class_cells = get(fit, "min_class_cells", "fit", c.fit.min_class_cells);
    c.fit.floor = get(fit, "floor", "fit", c.fit.floor);
    c.fit.bootstrap_resamples = get(fit, "bootstrap_resamples", "fit", c.score.bootstrap_resamples);
    c.fit.bootstrap_seed = get(fit, "bootstrap_seed", "fit", c.score.seed);
    return c;
}

RunConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json tasks = json::array(), encodings = json::array(), quota = json::object(), thresholds = json::object();
    for (auto t : c.tasks) tasks.push_back(to_string(t));
    for (auto e : c.encodings) encodings.push_back(to_string(e));
    for (const auto& [t, n] : c.quota) quota[std::string(to_string(t))] = n;
    for (const auto& [e, th] : c.thresholds) {
        thresholds[std::string(to_string(e))] = {{"small_max", th.small_max}, {"medium_max", th.medium_max}};
    }
    json backend = {{"kind", to_string(c.backend.kind)},
                    {"endpoint", c.backend.endpoint},
                    {"model", c.backend.model},
                    {"api_key_env", c.backend.api_key_env},
                    {"temperature", c.backend.temperature},
                    {"non_paper_mode", c.backend.non_paper_mode},
                    {"max_output_tokens", c.backend.max_output_tokens ? json(*c.backend.max_output_tokens) : json()},
                    {"timeout_s", c.backend.timeout_s},
                    {"retry",
                     {{"max_attempts", c.backend.retry.max_attempts},
                      {"initial_backoff_s", c.backend.retry.initial_backoff_s},
                      {"backoff_multiplier", c.backend.retry.backoff_multiplier},
                      {"max_backoff_s", c.backend.retry.max_backoff_s}}},
                    {"requests_per_minute", c.backend.requests_per_minute},
                    {"parallelism", c.backend.parallelism}};
    return {{"tasks", tasks},
            {"encodings", encodings},
            {"graph",
             {{"node_count", c.node_count},
              {"density", c.density},
              {"seed", c.seed},
              {"samples_per_graph", c.samples_per_graph}}},
            {"tokenizer", c.tokenizer},
            {"quota", quota},
            {"noise_count", c.noise_count},
            {"min_degree", c.min_degree},
            {"max_attempts", c.max_attempts},
            {"thresholds", thresholds},
            {"backend", backend},
            {"mock", c.backend.mock},
            {"score",
             {{"bootstrap_resamples", c.score.bootstrap_resamples},
              {"seed", c.score.seed},
              {"repetition_threshold", c.parse.repetition_threshold}}},
            {"fit",
             {{"split_seed", c.fit.split_seed},
              {"min_class_cells", c.fit.min_class_cells},
              {"floor", c.fit.floor},
              {"bootstrap_resamples", c.fit.bootstrap_resamples},
              {"bootstrap_seed", c.fit.bootstrap_seed}}}};
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

constexpr std::string_view kStages[] = {"generate", "run", "score", "fit", "report"};

int stage_index(std::string_view stage) {
    for (std::size_t i = 0; i < std::size(kStages); ++i) {
        if (kStages[i] == stage) return static_cast<int>(i);
    }
    throw Error("unknown stage " + std::string(stage));
}

std::string corpus_name(TaskKind t, Encoding e) {
    return std::string(to_string(t)) + "-" + std::string(to_string(e)) + ".jsonl";
}

template <class T>
std::vector<T> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<T> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(json::parse(line).get<T>());
    }
    return out;
}

template <class T>
std::string to_jsonl(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) out += json(item).dump() + "\n";
    return out;
}

}  // namespace

Pipeline::Pipeline(fs::path run_dir) : dir_(std::move(run_dir)) {}

json Pipeline::manifest() const {
    const auto path = dir_ / "manifest.json";
    if (!fs::exists(path)) return json();
    return json::parse(read_file(path));
}

RunConfig Pipeline::config() const {
    if (!fs::exists(dir_ / "config.json")) {
        throw IoError(dir_.string() + " holds no config.json; run `generate` first");
    }
    return load_config(dir_ / "config.json");
}

std::vector<std::string> Pipeline::stage_files(std::string_view stage) const {
    const json m = manifest();
    std::vector<std::string> out;
    if (m.is_null() || !m["stages"].contains(std::string(stage))) return out;
    for (const auto& [name, hash] : m["stages"][std::string(stage)]["files"].items()) out.push_back(name);
    return out;
}

std::vector<HashProblem> Pipeline::verify() const {
    const json m = manifest();
    if (m.is_null()) throw IoError(dir_.string() + " holds no manifest.json");
    std::vector<HashProblem> problems;
    auto check = [&](const std::string& rel, const std::string& expected) {
        const auto path = dir_ / rel;
        const std::string actual = fs::exists(path) ? sha256_file(path) : "";
        if (actual != expected) problems.push_back({rel, expected, actual});
    };
    check("config.json", m.at("config_sha256").get<std::string>());
    for (auto stage : kStages) {
        const std::string s(stage);
        if (!m["stages"].contains(s)) continue;
        for (const auto& [rel, hash] : m["stages"][s]["files"].items()) check(rel, hash.get<std::string>());
    }
    return problems;
}

void Pipeline::require_stages(std::initializer_list<std::string_view> stages) const {
    const json m = manifest();
    for (auto stage : stages) {
        if (m.is_null() || !m["stages"].contains(std::string(stage))) {
            throw IoError("stage `" + std::string(stage) + "` has not been run in " + dir_.string());
        }
    }
    const auto problems = verify();
    std::string msg;
    for (const auto& p : problems) {
        const bool upstream =
            p.path == "config.json" || std::any_of(stages.begin(), stages.end(), [&](std::string_view s) {
                const auto files = m["stages"][std::string(s)]["files"];
                return files.contains(p.path);
            });
        if (upstream) msg += " " + p.path + (p.actual.empty() ? " (missing)" : " (changed)");
    }
    if (!msg.empty()) throw HashMismatchError("upstream files do not match the manifest:" + msg);
}

void Pipeline::record_stage(std::string_view stage, const std::vector<std::string>& files, const json& extra) {
    json m = manifest();
    const int index = stage_index(stage);
    for (std::size_t i = static_cast<std::size_t>(index) + 1; i < std::size(kStages); ++i) {
        m["stages"].erase(std::string(kStages[i]));
    }
    json hashes = json::object();
    for (const auto& rel : files) hashes[rel] = sha256_file(dir_ / rel);
    json entry = {{"files", hashes}};
    for (const auto& [k, v] : extra.items()) entry[k] = v;
    m["stages"][std::string(stage)] = entry;
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
}

void Pipeline::generate(const RunConfig& config) {
    const auto tokenizer = load_tokenizer(config.tokenizer);
    const json normalized = to_json(config);
    const std::string config_text = normalized.dump(2) + "\n";
    fs::create_directories(dir_);
    write_file_atomic(dir_ / "config.json", config_text);

    std::vector<std::string> files;
    for (auto task : config.tasks) {
        for (auto enc : config.encodings) {
            const auto spec = config.corpus_spec(task, enc);
            const auto instances = sample_corpus(spec, *tokenizer);
            CorpusHeader h{task, enc, tokenizer->id(), tokenizer->vocabulary_hash(), spec.thresholds,
                           {spec.node_count, spec.density, spec.seed}, instances.size()};
            const std::string rel = "corpus/" + corpus_name(task, enc);
            write_corpus(dir_ / rel, h, instances);
            files.push_back(rel);
        }
    }

    json formats = {{"encoding", kEncodingFormatVersion},
                    {"prompt", kPromptFormatVersion},
                    {"corpus", std::string(kCorpusFormat) + "/" + std::to_string(kCorpusVersion)},
                    {"fit", kFitFormatVersion},
                    {"report", kReportFormatVersion},
                    {"manifest", kManifestVersion}};
    json m = {{"format_version", kManifestVersion},
              {"tool", kToolName},
              {"tool_version", kToolVersion},
              {"formats", formats},
              {"rng", std::string(Rng::kAlgorithm) + "/" + std::to_string(Rng::kVersion)},
              {"tokenizer", {{"id", tokenizer->id()}, {"vocabulary_hash", tokenizer->vocabulary_hash()}}},
              {"graph",
               {{"node_count", config.node_count},
                {"density", config.density},
                {"seed", config.seed},
                {"samples_per_graph", config.samples_per_graph},
                {"seed_schedule", "corpus seed = mix(seed, fnv1a(task)); graph g seed = mix(corpus seed, g)"}}},
              {"encodings", normalized["encodings"]},
              {"backend", redacted(config.backend)},
              {"config_sha256", sha256_hex(config_text)},
              {"stages", json::object()}};
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    record_stage("generate", files);
}

RunStats Pipeline::run(std::shared_ptr<ChatTransport> transport) {
    require_stages({"generate"});
    const RunConfig cfg = config();
    if (cfg.backend.kind == BackendKind::live && !transport) transport = make_live_transport(cfg.backend);
    auto cache = std::make_shared<ResponseCache>(dir_ / "cache");
    auto log = std::make_shared<RequestLog>(dir_ / "logs" / "requests.jsonl");
    Runner runner(cfg.backend, transport, cache, log);

    std::vector<std::string> files;
    std::size_t failed = 0;
    for (const auto& rel : stage_files("generate")) {
        const Corpus corpus = read_corpus(dir_ / rel);
        const auto responses = runner.run(corpus.instances);
        for (const auto& r : responses) failed += r.error ? 1 : 0;
        const std::string out = "responses/" + fs::path(rel).filename().string();
        write_file_atomic(dir_ / out, to_jsonl(responses));
        files.push_back(out);
    }
    record_stage("run", files, {{"model", cfg.backend.effective_model()}, {"failed_requests", failed}});
    if (failed) {
        throw BackendError(std::to_string(failed) +
                           " requests failed after retries; their responses are recorded as errors");
    }
    return runner.stats();
}

void Pipeline::score() {
    require_stages({"generate", "run"});
    const RunConfig cfg = config();
    std::vector<std::string> files;
    std::vector<ScoredInstance> all;
    for (const auto& rel : stage_files("generate")) {
        const auto name = fs::path(rel).filename().string();
        const Corpus corpus = read_corpus(dir_ / rel);
        const auto responses = read_jsonl<ModelResponse>(dir_ / "responses" / name);
        auto scored = score_instances(corpus.instances, responses, cfg.parse);
        const std::string out = "scores/scored-" + name;
        write_file_atomic(dir_ / out, to_jsonl(scored));
        files.push_back(out);
        all.insert(all.end(), std::make_move_iterator(scored.begin()), std::make_move_iterator(scored.end()));
    }
    const auto cells = lidbench::score(all, cfg.score);
    write_file_atomic(dir_ / "scores/cells.csv", cells_csv(cells));
    write_file_atomic(dir_ / "scores/cells.jsonl", cells_jsonl(cells));
    files.push_back("scores/cells.csv");
    files.push_back("scores/cells.jsonl");
    record_stage("score", files);
}

std::vector<FitResult> Pipeline::fit() {
    require_stages({"generate", "run", "score"});
    const RunConfig cfg = config();
    std::vector<std::string> files;
    std::vector<FitResult> fits;
    for (auto enc : cfg.encodings) {
        const auto edge = dir_ / "scores" / ("scored-" + corpus_name(TaskKind::edge_existence, enc));
        const auto common = dir_ / "scores" / ("scored-" + corpus_name(TaskKind::common_connection, enc));
        if (!fs::exists(edge) || !fs::exists(common)) continue;
        const auto e = read_jsonl<ScoredInstance>(edge);
        const auto c = read_jsonl<ScoredInstance>(common);
        FitResult f = compare_models(e, c, cfg.fit);
        const std::string name(to_string(enc));
        write_file_atomic(dir_ / "fit" / ("fit-" + name + ".json"), json(f).dump(2) + "\n");
        write_file_atomic(dir_ / "fit" / ("fit-curves-" + name + ".svg"), fit_curves_svg(f));
        files.push_back("fit/fit-" + name + ".json");
        files.push_back("fit/fit-curves-" + name + ".svg");
        fits.push_back(std::move(f));
    }
    if (fits.empty()) {
        throw FitError("fitting needs edge_existence and common_connection scores for at least one encoding");
    }
    record_stage("fit", files);
    return fits;
}

void Pipeline::report() {
    const json m = manifest();
    const bool with_fit = !m.is_null() && m["stages"].contains("fit");
    if (with_fit) {
        require_stages({"generate", "run", "score", "fit"});
    } else {
        require_stages({"generate", "run", "score"});
    }
    const auto cells = read_jsonl<AccuracyCell>(dir_ / "scores/cells.jsonl");
    std::vector<ScoredInstance> all;
    for (const auto& rel : stage_files("score")) {
        if (fs::path(rel).filename().string().rfind("scored-", 0) != 0) continue;
        auto s = read_jsonl<ScoredInstance>(dir_ / rel);
        all.insert(all.end(), s.begin(), s.end());
    }
    std::vector<FitResult> fits;
    if (with_fit) {
        for (const auto& rel : stage_files("fit")) {
            if (fs::path(rel).extension() == ".json") fits.push_back(json::parse(read_file(dir_ / rel)).get<FitResult>());
        }
    }
    json inputs = json::object();
    for (auto stage : {"generate", "run", "score", "fit"}) {
        if (m["stages"].contains(stage)) {
            for (const auto& [rel, hash] : m["stages"][stage]["files"].items()) inputs[rel] = hash;
        }
    }
    const json metadata = {{"tool", kToolName},
                           {"tool_version", kToolVersion},
                           {"config_sha256", m["config_sha256"]},
                           {"rng", m["rng"]},
                           {"tokenizer", m["tokenizer"]},
                           {"backend", m["backend"]},
                           {"inputs", inputs}};
    const auto names = emit_report(cells, summarize_degeneration(all), fits, metadata, dir_ / "report");
    std::vector<std::string> files;
    for (const auto& n : names) files.push_back("report/" + n);
    record_stage("report", files);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const HashMismatchError*>(&e)) return 2;
    if (dynamic_cast<const AuthError*>(&e) || dynamic_cast<const BackendError*>(&e)) return 3;
    return 1;
}

}  // namespace lidbench
