#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/runner.hpp"
#include "lidbench/task.hpp"

namespace lidbench {

enum class AnswerKind { yes_no, integer, degenerate };

enum class Degeneration { none, no_final_answer, repetition, self_contradiction, format_violation };

inline constexpr Degeneration kAllDegenerations[] = {
    Degeneration::none, Degeneration::no_final_answer, Degeneration::repetition,
    Degeneration::self_contradiction, Degeneration::format_violation};

std::string_view to_string(AnswerKind kind);
std::string_view to_string(Degeneration d);
Degeneration degeneration_from_string(std::string_view name);

struct ParsedAnswer {
    AnswerKind kind = AnswerKind::degenerate;
    std::optional<bool> yes;
    std::optional<std::int64_t> integer;
    Degeneration degeneration = Degeneration::no_final_answer;
    /// Stated (target1, source) and (source, target2) counts, when both parse.
    std::optional<std::array<std::int64_t, 2>> subcounts;

    bool correct_for(const TaskInstance& instance) const;
};

struct ParseOptions {
    /// Consecutive repeats of one sentence (or of a cycle of up to three
    /// sentences) that mark a response as repetition.
    std::size_t repetition_threshold = 10;
};

/// Length of the longest run of repeated sentences or short sentence cycles,
/// counted in repeated units. Sentences are split on . ! ? and newlines,
/// lowercased and whitespace-normalized.
std::size_t longest_repetition(std::string_view text);

/// Total: every text maps to a ParsedAnswer. Precedence: empty text and
/// repetition first, then the task's answer template.
ParsedAnswer parse_answer(std::string_view text, const TaskInstance& instance,
                          const ParseOptions& options = {});

/// Failed requests (error set) parse as no_final_answer.
ParsedAnswer parse_answer(const ModelResponse& response, const TaskInstance& instance,
                          const ParseOptions& options = {});

/// Sort rank of an instance's cell within its task: placement order, grid
/// order (p1 major), or bucket order (first label major).
int cell_rank(const TaskInstance& instance);

/// Per-instance outcome, the unit consumed by scoring and fitting.
struct ScoredInstance {
    std::string id;
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::string cell;
    int rank = 0;
    std::optional<GridCell> grid;
    std::vector<double> positions;
    std::vector<std::size_t> median_distances;
    std::size_t prompt_tokens = 0;
    std::int64_t ground_truth = 0;
    bool correct = false;
    Degeneration degeneration = Degeneration::none;
    /// The parsed value as text ("yes", "12"), empty when degenerate.
    std::string answer;
};

void to_json(nlohmann::json& j, const ScoredInstance& s);
void from_json(const nlohmann::json& j, ScoredInstance& s);

ScoredInstance score_instance(const TaskInstance& instance, const ModelResponse& response,
                              const ParseOptions& options = {});

/// Matches responses to instances by id. Throws ParameterError when an
/// instance has no response.
std::vector<ScoredInstance> score_instances(std::span<const TaskInstance> instances,
                                            std::span<const ModelResponse> responses,
                                            const ParseOptions& options = {});

struct AccuracyCell {
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::string cell;
    int rank = 0;
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;  // percent
    double stddev = 0.0;    // percent, bootstrap
    std::size_t degenerate = 0;
    double degeneration_rate = 0.0;  // percent
    /// Mean of each position coordinate over the cell's instances.
    std::vector<double> mean_positions;
};

void to_json(nlohmann::json& j, const AccuracyCell& c);
void from_json(const nlohmann::json& j, AccuracyCell& c);

struct ScoreOptions {
    std::size_t bootstrap_resamples = 1000;
    std::uint64_t seed = 0;
};

/// Groups by (task, encoding, cell) in canonical order. Accuracy per cell is
/// 100 * non-degenerate exact matches / N; degenerate answers count as wrong.
std::vector<AccuracyCell> score(std::span<const ScoredInstance> scored, const ScoreOptions& options = {});

struct DegenerationSummary {
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::size_t n = 0;
    std::array<std::size_t, 5> counts{};  // indexed by Degeneration
    double rate = 0.0;                    // percent degenerate
};

std::vector<DegenerationSummary> summarize_degeneration(std::span<const ScoredInstance> scored);

}  // namespace lidbench
