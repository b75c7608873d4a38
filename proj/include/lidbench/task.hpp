#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/encoding.hpp"
#include "lidbench/graph.hpp"
#include "lidbench/tokenizer.hpp"

namespace lidbench {

inline constexpr std::string_view kPromptFormatVersion = "prompt/1";
inline constexpr std::string_view kCorpusFormat = "lidbench-corpus";
inline constexpr int kCorpusVersion = 1;

enum class TaskKind { edge_existence, common_connection, similarity };

inline constexpr TaskKind kAllTasks[] = {TaskKind::edge_existence, TaskKind::common_connection,
                                         TaskKind::similarity};

std::string_view to_string(TaskKind task);
TaskKind task_from_string(std::string_view name);

/// Whether answers to this task are yes/no (else a single integer).
inline bool is_yes_no(TaskKind task) { return task != TaskKind::common_connection; }
/// Similarity prompts ask for chain-of-thought with a "Final answer:" line.
inline bool uses_cot(TaskKind task) { return task == TaskKind::similarity; }

enum class Placement { beginning, middle, end };

inline constexpr Placement kAllPlacements[] = {Placement::beginning, Placement::middle,
                                               Placement::end};

std::string_view to_string(Placement p);
Placement placement_from_string(std::string_view name);

/// Common-block slot inside one subgraph's edge list: 0 start, 1 middle, 2 end.
/// The first subgraph uses p1 in {0,1,2}, the second p2 in {3,4,5}.
using GridCell = std::array<int, 2>;

struct TaskInstance {
    std::string id;
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::string system_prompt;
    std::string prompt;
    /// 0/1 for yes-no tasks, the count for common_connection.
    std::int64_t ground_truth = 0;

    std::optional<Placement> placement;                   // edge_existence
    std::optional<GridCell> grid;                         // common_connection
    std::optional<std::array<DistanceLabel, 2>> buckets;  // similarity
    /// Median common-node token distance: one entry for common_connection,
    /// (target1, source) then (source, target2) for similarity.
    std::vector<std::size_t> median_distances;
    /// Token midpoints of the relevant text divided by prompt_tokens:
    /// edge_existence the interest pair; common_connection the two common
    /// blocks; similarity the three subgraph blocks.
    std::vector<double> positions;
    std::size_t prompt_tokens = 0;  // user prompt only
    std::size_t input_tokens = 0;   // system + user

    // Provenance: enough to rebuild the prompt byte for byte.
    GraphParams graph;
    /// Interest nodes in role order: (a, b) or (target1, source, target2).
    std::vector<NodeId> nodes;
    /// Noise nodes in layout order (edge_existence only).
    std::vector<NodeId> noise_nodes;
    std::optional<SimilarityTemplate> question_template;
    std::optional<std::uint64_t> shuffle_seed;
    std::string tokenizer_id;

    /// Cell key used for aggregation: "beginning", "0,3", "Small,Large".
    std::string cell_key() const;
};

void to_json(nlohmann::json& j, const TaskInstance& t);
void from_json(const nlohmann::json& j, TaskInstance& t);

/// Fixed system message sent with every prompt.
std::string_view system_prompt();

/// Question text of a similarity template, with target1 = i, source = j,
/// target2 = k.
std::string similarity_question(SimilarityTemplate t, NodeId i, NodeId j, NodeId k);

/// Reorders `edges` (ascending) so that the members of `common` form one
/// contiguous ascending block at slot 0 (start), 1 (centered, rounding
/// toward the start) or 2 (end); other edges keep ascending order.
std::vector<NodeId> group_common_block(std::span<const NodeId> edges,
                                       std::span<const NodeId> common, int slot);

/// Noise nodes distinct from the interest pair. Throws ParameterError when
/// the graph is too small.
std::vector<NodeId> sample_noise_nodes(const Graph& graph, NodeId a, NodeId b, std::size_t count,
                                       Rng& rng);

/// Interest blocks are adjacent, at indices (0,1), (k/2, k/2+1) or (k, k+1)
/// among k + 2 blocks; noise blocks keep their given order.
TaskInstance build_edge_existence(const Graph& graph, NodeId a, NodeId b,
                                  std::span<const NodeId> noise, Placement placement,
                                  Encoding encoding, const Tokenizer& tokenizer);

/// Two subgraph blocks, each with its common connections grouped at the
/// requested slot. Throws RejectedSample when a and b share no neighbor.
TaskInstance build_common_connection(const Graph& graph, NodeId a, NodeId b, GridCell cell,
                                     Encoding encoding, const Tokenizer& tokenizer);

/// Blocks [target1, source, target2], each edge list shuffled by a stream of
/// `shuffle_seed`. Throws RejectedSample when either common set is empty.
TaskInstance build_similarity(const Graph& graph, NodeId target1, NodeId source, NodeId target2,
                              Encoding encoding, SimilarityTemplate question,
                              std::uint64_t shuffle_seed, const Tokenizer& tokenizer,
                              const BucketThresholds& thresholds);

/// Regenerates an instance from its provenance fields alone.
TaskInstance rebuild(const TaskInstance& provenance, const Tokenizer& tokenizer,
                     const BucketThresholds& thresholds);

/// Median distances of a similarity instance, recomputed by scanning the
/// prompt text for the three blocks and re-tokenizing it.
std::array<std::size_t, 2> recompute_similarity_distances(const TaskInstance& instance,
                                                          const Tokenizer& tokenizer);

/// Neighbor ids of the [target1, source, target2] blocks, ascending, scanned
/// from the prompt text.
std::array<std::vector<NodeId>, 3> similarity_block_neighbors(const TaskInstance& instance);

// ---------------------------------------------------------------------------
// Corpus sampling

struct CorpusSpec {
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::size_t node_count = 1000;
    double density = 0.1;
    std::uint64_t seed = 0;
    /// Consecutive samples (or rejection attempts) drawn from one graph
    /// before a fresh graph is generated.
    std::size_t samples_per_graph = 20;
    /// Instances per cell: per placement, per (p1, p2) pair, or per bucket
    /// pair. Must be even for similarity.
    std::size_t per_cell = 100;
    std::size_t noise_count = 9;
    std::size_t min_degree = 0;
    std::size_t max_attempts = 5'000'000;
    BucketThresholds thresholds = default_thresholds(Encoding::incident);
};

/// Edge existence: per_cell node pairs, alternating true/false edges, each
/// rendered at all three placements.
std::vector<TaskInstance> sample_edge_existence_corpus(const CorpusSpec& spec,
                                                       const Tokenizer& tokenizer);

/// Common connection: per_cell node pairs with at least one common
/// connection, each rendered at all nine (p1, p2) cells.
std::vector<TaskInstance> sample_common_connection_corpus(const CorpusSpec& spec,
                                                          const Tokenizer& tokenizer);

/// Similarity: rejection sampling until each of the nine bucket pairs holds
/// per_cell instances, half with answer yes. Throws PartialCorpusError.
std::vector<TaskInstance> sample_similarity_corpus(const CorpusSpec& spec,
                                                   const Tokenizer& tokenizer);

std::vector<TaskInstance> sample_corpus(const CorpusSpec& spec, const Tokenizer& tokenizer);

struct CorpusHeader {
    TaskKind task = TaskKind::edge_existence;
    Encoding encoding = Encoding::incident;
    std::string tokenizer_id;
    std::string vocabulary_hash;
    BucketThresholds thresholds;
    GraphParams graph;  // node_count, density and the master seed
    std::size_t instance_count = 0;
};

/// One JSON object per line: the header first, then every instance.
std::string serialize_corpus(const CorpusHeader& header, std::span<const TaskInstance> instances);
void write_corpus(const std::filesystem::path& path, const CorpusHeader& header,
                  std::span<const TaskInstance> instances);

struct Corpus {
    CorpusHeader header;
    std::vector<TaskInstance> instances;
};

Corpus read_corpus(const std::filesystem::path& path);

}  // namespace lidbench
