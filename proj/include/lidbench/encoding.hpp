#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidbench/graph.hpp"

namespace lidbench {

/// Version tag of the textual layouts below. Token distances depend on the
/// exact bytes, so any change to the rendered text must bump it.
inline constexpr std::string_view kEncodingFormatVersion = "encoding/1";

enum class Encoding { incident, adjacency, expert };

inline constexpr Encoding kAllEncodings[] = {Encoding::incident, Encoding::adjacency,
                                             Encoding::expert};

std::string_view to_string(Encoding e);
Encoding encoding_from_string(std::string_view name);

/// Half-open byte range [begin, end) into some text.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const CharSpan&) const = default;
};

struct EdgeSpan {
    NodeId neighbor = 0;
    CharSpan span;

    bool operator==(const EdgeSpan&) const = default;
};

struct EncodedSubgraph {
    NodeId center = 0;
    Encoding encoding = Encoding::incident;
    std::string text;
    /// One entry per edge, in subgraph edge order, relative to `text`.
    std::vector<EdgeSpan> edge_spans;
};

// Layouts, for center C and neighbors a, b:
//   incident   "Node C is connected to nodes a, b."   (span = the neighbor id)
//              "Node C is connected to no nodes."     (no neighbors)
//   adjacency  "(C, a) (C, b)"                        (span = one pair)
//   expert     "C -> a C -> b"                        (span = one arrow)
// Empty adjacency/expert subgraphs render as the empty string.
EncodedSubgraph encode(const Subgraph& subgraph, Encoding encoding);

struct GraphSection {
    std::string text;
    /// Byte offset of each part within `text`.
    std::vector<std::size_t> offsets;
};

/// Joins parts with single newlines. All parts must share one encoding.
GraphSection assemble_graph_section(std::span<const EncodedSubgraph> parts);

/// Edge spans located by scanning encoded text, independent of `encode`.
/// Validates that every edge belongs to `center`; throws ParameterError on
/// malformed input.
std::vector<EdgeSpan> scan_edges(std::string_view text, Encoding encoding, NodeId center);

/// Recovers the ordered neighbor list from one encoded block.
std::vector<NodeId> parse_edges(std::string_view text, Encoding encoding, NodeId center);

/// Reads the center id from an incident block ("Node C is ..."), or from the
/// first edge of an adjacency/expert block. Throws on empty adjacency/expert
/// text since the center is not recoverable there.
NodeId parse_center(std::string_view text, Encoding encoding);

}  // namespace lidbench
