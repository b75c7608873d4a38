#include "lidbench/graph.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "lidbench/error.hpp"
#include "lidbench/rng.hpp"

using namespace lidbench;

namespace {

std::vector<std::pair<NodeId, NodeId>> edge_list(const Graph& g) {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        for (NodeId u : g.neighbors(v)) {
            if (v < u) out.emplace_back(v, u);
        }
    }
    return out;
}

}  // namespace

// Edge lists produced by an independent Python port of the generator.
TEST(Graph, ReproducesReferenceEdgeLists) {
    const std::vector<std::pair<NodeId, NodeId>> g1{{0, 4}, {0, 6}, {0, 7}, {1, 2}, {2, 6}, {2, 7}, {3, 4},
                                                    {3, 5}, {3, 6}, {3, 7}, {4, 6}, {4, 7}, {5, 6}, {5, 7}};
    EXPECT_EQ(edge_list(generate_er(8, 0.5, 1)), g1);
    const std::vector<std::pair<NodeId, NodeId>> g2{{0, 1}, {0, 4}, {3, 4}};
    EXPECT_EQ(edge_list(generate_er(6, 0.3, 123)), g2);
}

TEST(Graph, AdjacencyIsSymmetricSortedAndLoopFree) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Graph g = generate_er(60, 0.2, seed);
        for (NodeId v = 0; v < g.node_count(); ++v) {
            const auto n = g.neighbors(v);
            EXPECT_TRUE(std::is_sorted(n.begin(), n.end()));
            EXPECT_EQ(std::adjacent_find(n.begin(), n.end()), n.end());
            for (NodeId u : n) {
                EXPECT_NE(u, v);
                EXPECT_TRUE(edge_exists(g, u, v));
            }
        }
    }
}

TEST(Graph, DensityExtremes) {
    EXPECT_EQ(generate_er(30, 0.0, 1).edge_count(), 0u);
    EXPECT_EQ(generate_er(30, 1.0, 1).edge_count(), 30u * 29u / 2u);
}

TEST(Graph, EdgeCountNearExpectation) {
    const Graph g = generate_er(1000, 0.1, 2024);
    const double pairs = 1000.0 * 999.0 / 2.0;
    const double sd = std::sqrt(pairs * 0.1 * 0.9);
    EXPECT_NEAR(static_cast<double>(g.edge_count()), pairs * 0.1, 4 * sd);
}

TEST(Graph, SeedChangesGraph) {
    EXPECT_NE(edge_list(generate_er(40, 0.3, 1)), edge_list(generate_er(40, 0.3, 2)));
    EXPECT_EQ(edge_list(generate_er(40, 0.3, 1)), edge_list(generate_er(40, 0.3, 1)));
}

TEST(Graph, RejectsBadParameters) {
    EXPECT_THROW(generate_er(1, 0.5, 0), ParameterError);
    EXPECT_THROW(generate_er(10, -0.1, 0), ParameterError);
    EXPECT_THROW(generate_er(10, 1.5, 0), ParameterError);
    const Graph g = generate_er(5, 0.5, 0);
    EXPECT_THROW(g.neighbors(5), ParameterError);
    EXPECT_THROW(edge_exists(g, 2, 2), ParameterError);
    EXPECT_THROW(common_connections(g, 1, 1), ParameterError);
}

TEST(Graph, CommonConnectionsMatchNaiveLoop) {
    const Graph g = generate_er(20, 0.4, 77);
    for (NodeId a = 0; a < 20; ++a) {
        for (NodeId b = 0; b < 20; ++b) {
            if (a == b) continue;
            std::vector<NodeId> naive;
            for (NodeId v = 0; v < 20; ++v) {
                if (v != a && v != b && edge_exists(g, a, v) && edge_exists(g, b, v)) naive.push_back(v);
            }
            EXPECT_EQ(common_connections(g, a, b), naive);
        }
    }
}

TEST(Graph, SimilarityAnswerIsStrict) {
    EXPECT_TRUE(similarity_answer(3, 4, SimilarityTemplate::greater_jk_over_ij));
    EXPECT_FALSE(similarity_answer(4, 4, SimilarityTemplate::greater_jk_over_ij));
    EXPECT_FALSE(similarity_answer(4, 4, SimilarityTemplate::greater_ij_over_jk));
    EXPECT_TRUE(similarity_answer(6, 4, SimilarityTemplate::greater_ij_over_jk));
}

TEST(Graph, SimilarityTemplateNamesRoundTrip) {
    for (auto t : {SimilarityTemplate::greater_jk_over_ij, SimilarityTemplate::greater_ij_over_jk}) {
        EXPECT_EQ(similarity_template_from_string(to_string(t)), t);
    }
    EXPECT_THROW(similarity_template_from_string("bigger"), ParameterError);
}

TEST(Graph, SampleDistinctNodesHonorsExclusionsAndDegreeFloor) {
    const Graph g = generate_er(50, 0.2, 3);
    Rng rng(4);
    const NodeId exclude[] = {0, 1, 2};
    const auto nodes = sample_distinct_nodes(g, 20, rng, exclude, 8);
    std::set<NodeId> seen(nodes.begin(), nodes.end());
    EXPECT_EQ(seen.size(), nodes.size());
    for (NodeId v : nodes) {
        EXPECT_GT(v, 2u);
        EXPECT_GE(g.degree(v), 8u);
    }
    EXPECT_THROW(sample_distinct_nodes(g, 49, rng, exclude), ParameterError);
}
