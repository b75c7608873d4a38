#include "lidbench/graph.hpp"

#include <algorithm>
#include <iterator>
#include <string>

#include "lidbench/error.hpp"

namespace lidbench {

namespace {

void check_node(const Graph& g, NodeId v) {
    if (v >= g.node_count()) {
        throw ParameterError("node " + std::to_string(v) + " out of range for graph with " +
                             std::to_string(g.node_count()) + " nodes");
    }
}

}  // namespace

Graph Graph::from_edges(std::size_t node_count,
                        std::span<const std::pair<NodeId, NodeId>> edges) {
    Graph g;
    g.params_ = {node_count, 0.0, 0};
    g.adjacency_.assign(node_count, {});
    for (auto [a, b] : edges) {
        if (a >= node_count || b >= node_count) throw ParameterError("edge endpoint out of range");
        if (a == b) throw ParameterError("self-loops are not allowed");
        g.adjacency_[a].push_back(b);
        g.adjacency_[b].push_back(a);
    }
    for (auto& nbrs : g.adjacency_) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return g;
}

std::size_t Graph::edge_count() const {
    std::size_t twice = 0;
    for (const auto& nbrs : adjacency_) twice += nbrs.size();
    return twice / 2;
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
    check_node(*this, v);
    return adjacency_[v];
}

Graph generate_er(std::size_t node_count, double density, std::uint64_t seed) {
    if (node_count < 2) throw ParameterError("node_count must be at least 2");
    if (!(density >= 0.0 && density <= 1.0)) throw ParameterError("density must lie in [0, 1]");

    Graph g;
    g.params_ = {node_count, density, seed};
    g.adjacency_.assign(node_count, {});
    const auto expected = static_cast<std::size_t>(density * static_cast<double>(node_count));
    for (auto& list : g.adjacency_) list.reserve(expected + expected / 4 + 8);
    Rng rng(seed);
    // Ascending (i, j) keeps both adjacency lists sorted without a final sort.
    for (std::size_t i = 0; i < node_count; ++i) {
        for (std::size_t j = i + 1; j < node_count; ++j) {
            if (rng.uniform() < density) {
                g.adjacency_[i].push_back(static_cast<NodeId>(j));
                g.adjacency_[j].push_back(static_cast<NodeId>(i));
            }
        }
    }
    return g;
}

Subgraph subgraph_of(const Graph& graph, NodeId center) {
    auto nbrs = graph.neighbors(center);
    return Subgraph{center, {nbrs.begin(), nbrs.end()}};
}

bool edge_exists(const Graph& graph, NodeId a, NodeId b) {
    check_node(graph, b);
    if (a == b) throw ParameterError("edge_exists: nodes must differ");
    auto nbrs = graph.neighbors(a);
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

std::vector<NodeId> common_connections(const Graph& graph, NodeId a, NodeId b) {
    if (a == b) throw ParameterError("common_connections: nodes must differ");
    auto na = graph.neighbors(a);
    auto nb = graph.neighbors(b);
    std::vector<NodeId> out;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(out));
    return out;
}

std::string_view to_string(SimilarityTemplate t) {
    switch (t) {
        case SimilarityTemplate::greater_jk_over_ij: return "greater_jk_over_ij";
        case SimilarityTemplate::greater_ij_over_jk: return "greater_ij_over_jk";
    }
    return "?";
}

SimilarityTemplate similarity_template_from_string(std::string_view name) {
    if (name == "greater_jk_over_ij") return SimilarityTemplate::greater_jk_over_ij;
    if (name == "greater_ij_over_jk") return SimilarityTemplate::greater_ij_over_jk;
    throw ParameterError("unknown similarity template '" + std::string(name) + "'");
}

bool similarity_answer(std::size_t count_ij, std::size_t count_jk, SimilarityTemplate t) {
    return t == SimilarityTemplate::greater_jk_over_ij ? count_jk > count_ij
                                                       : count_ij > count_jk;
}

bool similarity_truth(const Graph& graph, NodeId target1, NodeId source, NodeId target2,
                      SimilarityTemplate t) {
    if (target1 == source || source == target2 || target1 == target2) {
        throw ParameterError("similarity_truth: the three nodes must be distinct");
    }
    const auto ij = common_connections(graph, target1, source).size();
    const auto jk = common_connections(graph, source, target2).size();
    return similarity_answer(ij, jk, t);
}

std::vector<NodeId> sample_distinct_nodes(const Graph& graph, std::size_t count, Rng& rng,
                                          std::span<const NodeId> exclude,
                                          std::size_t min_degree) {
    std::vector<NodeId> pool;
    pool.reserve(graph.node_count());
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        if (std::find(exclude.begin(), exclude.end(), v) != exclude.end()) continue;
        if (graph.degree(v) < min_degree) continue;
        pool.push_back(v);
    }
    if (pool.size() < count) {
        throw ParameterError("graph has " + std::to_string(pool.size()) +
                             " eligible nodes, need " + std::to_string(count));
    }
    // Partial Fisher-Yates: the first `count` slots are the sample.
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace lidbench
