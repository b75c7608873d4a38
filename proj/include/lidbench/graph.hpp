#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lidbench/rng.hpp"

namespace lidbench {

using NodeId = std::uint32_t;

/// Parameters that fully determine an Erdős–Rényi graph.
struct GraphParams {
    std::size_t node_count = 1000;
    double density = 0.1;
    std::uint64_t seed = 0;

    bool operator==(const GraphParams&) const = default;
};

/// Undirected simple graph stored as sorted adjacency lists.
class Graph {
public:
    Graph() = default;

    /// Builds a graph from an explicit edge list (used by tests and fixtures).
    /// Duplicate edges are collapsed; self-loops are rejected.
    static Graph from_edges(std::size_t node_count,
                            std::span<const std::pair<NodeId, NodeId>> edges);

    const GraphParams& params() const { return params_; }
    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const;

    std::span<const NodeId> neighbors(NodeId v) const;
    std::size_t degree(NodeId v) const { return neighbors(v).size(); }

private:
    friend Graph generate_er(std::size_t, double, std::uint64_t);

    GraphParams params_{};
    std::vector<std::vector<NodeId>> adjacency_;
};

/// A center node together with an ordered neighbor list. The order is the
/// textual layout order used when the subgraph is encoded.
struct Subgraph {
    NodeId center = 0;
    std::vector<NodeId> edges;

    bool operator==(const Subgraph&) const = default;
};

/// Each pair {i, j}, i < j, is visited in ascending (i, j) order and becomes
/// an edge when one uniform draw falls below `density`.
Graph generate_er(std::size_t node_count, double density, std::uint64_t seed);
inline Graph generate_er(const GraphParams& p) { return generate_er(p.node_count, p.density, p.seed); }

Subgraph subgraph_of(const Graph& graph, NodeId center);

bool edge_exists(const Graph& graph, NodeId a, NodeId b);

/// Sorted N(a) ∩ N(b).
std::vector<NodeId> common_connections(const Graph& graph, NodeId a, NodeId b);

/// The two question templates of the similarity task, with target1 = v_i,
/// source = v_j and target2 = v_k.
enum class SimilarityTemplate {
    greater_jk_over_ij,  // is |N(v_j) ∩ N(v_k)| > |N(v_i) ∩ N(v_j)| ?
    greater_ij_over_jk,  // is |N(v_i) ∩ N(v_j)| > |N(v_j) ∩ N(v_k)| ?
};

std::string_view to_string(SimilarityTemplate t);
SimilarityTemplate similarity_template_from_string(std::string_view name);

/// Strict comparison; ties answer false under both templates.
bool similarity_answer(std::size_t count_ij, std::size_t count_jk, SimilarityTemplate t);

bool similarity_truth(const Graph& graph, NodeId target1, NodeId source, NodeId target2,
                      SimilarityTemplate t);

/// Draws `count` distinct nodes uniformly, skipping `exclude` and any node with
/// degree below `min_degree`. Throws ParameterError if not enough candidates.
std::vector<NodeId> sample_distinct_nodes(const Graph& graph, std::size_t count, Rng& rng,
                                          std::span<const NodeId> exclude = {},
                                          std::size_t min_degree = 0);

}  // namespace lidbench
