#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/evaluator.hpp"
#include "lidbench/fit.hpp"
#include "lidbench/runner.hpp"
#include "lidbench/task.hpp"

namespace lidbench {

inline constexpr std::string_view kToolName = "lidbench";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

struct RunConfig {
    std::vector<TaskKind> tasks{kAllTasks[0], kAllTasks[1], kAllTasks[2]};
    std::vector<Encoding> encodings{kAllEncodings[0], kAllEncodings[1], kAllEncodings[2]};
    std::size_t node_count = 1000;
    double density = 0.1;
    std::uint64_t seed = 0;
    std::size_t samples_per_graph = 20;
    std::string tokenizer = "cl100k_base";
    /// Instances per cell, per task.
    std::map<TaskKind, std::size_t> quota{
        {TaskKind::edge_existence, 100}, {TaskKind::common_connection, 100}, {TaskKind::similarity, 100}};
    std::size_t noise_count = 9;
    std::size_t min_degree = 0;
    std::size_t max_attempts = 5'000'000;
    std::map<Encoding, BucketThresholds> thresholds{
        {Encoding::incident, default_thresholds(Encoding::incident)},
        {Encoding::adjacency, default_thresholds(Encoding::adjacency)},
        {Encoding::expert, default_thresholds(Encoding::expert)}};
    BackendConfig backend;
    ParseOptions parse;
    ScoreOptions score;
    FitOptions fit;

    CorpusSpec corpus_spec(TaskKind task, Encoding encoding) const;
};

/// Validates and fills defaults. Unknown keys are reported together in one
/// ConfigError naming each offending key path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Normalized form with every default spelled out.
nlohmann::json to_json(const RunConfig& config);

/// A stage output that no longer matches the manifest.
struct HashProblem {
    std::string path;  // relative to the run directory
    std::string expected;
    std::string actual;  // empty when the file is missing
};

/// Run-directory orchestration. Layout: config.json, manifest.json,
/// corpus/, responses/, scores/, fit/, report/, plus cache/ and logs/ (not
/// hashed). Each stage checks every earlier stage's files against the
/// manifest before running and drops later stages from it afterwards.
class Pipeline {
public:
    explicit Pipeline(std::filesystem::path run_dir);

    /// Writes config.json and corpus/<task>-<encoding>.jsonl.
    void generate(const RunConfig& config);
    /// Writes responses/<task>-<encoding>.jsonl. A null transport means the
    /// configured backend (live transport built from the environment).
    RunStats run(std::shared_ptr<ChatTransport> transport = nullptr);
    /// Writes scores/scored-<task>-<encoding>.jsonl, scores/cells.csv and
    /// scores/cells.jsonl.
    void score();
    /// Writes fit/fit-<encoding>.json and fit/fit-curves-<encoding>.svg for
    /// every encoding that has both edge-existence and common-connection scores.
    std::vector<FitResult> fit();
    /// Writes report/ from the scores and, when present, the fits.
    void report();
    /// Files whose content no longer matches the manifest.
    std::vector<HashProblem> verify() const;

    RunConfig config() const;
    nlohmann::json manifest() const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    void require_stages(std::initializer_list<std::string_view> stages) const;
    void record_stage(std::string_view stage, const std::vector<std::string>& files,
                      const nlohmann::json& extra = nlohmann::json::object());
    std::vector<std::string> stage_files(std::string_view stage) const;

    std::filesystem::path dir_;
};

/// Exit status for an exception escaping a command: 1 validation, 2 hash
/// mismatch, 3 backend failure.
int exit_code_for(const std::exception& e);

}  // namespace lidbench
