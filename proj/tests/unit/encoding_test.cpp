#include "lidbench/encoding.hpp"

#include <gtest/gtest.h>

#include "lidbench/error.hpp"

using namespace lidbench;

namespace {

std::string slice(const std::string& text, CharSpan s) { return text.substr(s.begin, s.size()); }

}  // namespace

TEST(Encoding, IncidentLayout) {
    const auto e = encode({17, {633, 940, 932}}, Encoding::incident);
    EXPECT_EQ(e.text, "Node 17 is connected to nodes 633, 940, 932.");
    ASSERT_EQ(e.edge_spans.size(), 3u);
    EXPECT_EQ(slice(e.text, e.edge_spans[1].span), "940");
    EXPECT_EQ(e.edge_spans[2].neighbor, 932u);
}

TEST(Encoding, AdjacencyAndExpertLayouts) {
    const auto adj = encode({17, {633, 940}}, Encoding::adjacency);
    EXPECT_EQ(adj.text, "(17, 633) (17, 940)");
    EXPECT_EQ(slice(adj.text, adj.edge_spans[1].span), "(17, 940)");
    const auto exp = encode({17, {633, 940}}, Encoding::expert);
    EXPECT_EQ(exp.text, "17 -> 633 17 -> 940");
    EXPECT_EQ(slice(exp.text, exp.edge_spans[0].span), "17 -> 633");
}

TEST(Encoding, EmptySubgraphs) {
    EXPECT_EQ(encode({3, {}}, Encoding::incident).text, "Node 3 is connected to no nodes.");
    EXPECT_EQ(encode({3, {}}, Encoding::adjacency).text, "");
    EXPECT_EQ(encode({3, {}}, Encoding::expert).text, "");
    EXPECT_EQ(parse_center("Node 3 is connected to no nodes.", Encoding::incident), 3u);
    EXPECT_THROW(parse_center("", Encoding::expert), ParameterError);
}

TEST(Encoding, ScanAgreesWithEncodeAndRoundTrips) {
    const Subgraph sg{5, {9, 1, 44, 12, 300}};
    for (Encoding enc : kAllEncodings) {
        const auto e = encode(sg, enc);
        EXPECT_EQ(scan_edges(e.text, enc, 5), e.edge_spans) << to_string(enc);
        EXPECT_EQ(parse_edges(e.text, enc, 5), sg.edges);
        EXPECT_EQ(parse_center(e.text, enc), 5u);
    }
}

TEST(Encoding, ScanRejectsForeignCenter) {
    EXPECT_THROW(scan_edges("(4, 9) (5, 1)", Encoding::adjacency, 5), ParameterError);
    EXPECT_THROW(scan_edges("Node 4 is connected to nodes 1.", Encoding::incident, 5), ParameterError);
    EXPECT_THROW(scan_edges("5 -> ", Encoding::expert, 5), ParameterError);
}

TEST(Encoding, SectionJoinsWithNewlines) {
    std::vector<EncodedSubgraph> parts{encode({1, {2}}, Encoding::expert), encode({2, {1, 3}}, Encoding::expert)};
    const auto s = assemble_graph_section(parts);
    EXPECT_EQ(s.text, "1 -> 2\n2 -> 1 2 -> 3");
    EXPECT_EQ(s.offsets, (std::vector<std::size_t>{0, 7}));
    parts.push_back(encode({3, {2}}, Encoding::incident));
    EXPECT_THROW(assemble_graph_section(parts), ParameterError);
}

TEST(Encoding, NamesRoundTrip) {
    for (Encoding e : kAllEncodings) EXPECT_EQ(encoding_from_string(to_string(e)), e);
    EXPECT_THROW(encoding_from_string("matrix"), ParameterError);
}
