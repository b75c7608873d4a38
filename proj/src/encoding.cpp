#include "lidbench/encoding.hpp"

#include <charconv>
#include <string>

#include "lidbench/error.hpp"

namespace lidbench {

std::string_view to_string(Encoding e) {
    switch (e) {
        case Encoding::incident: return "incident";
        case Encoding::adjacency: return "adjacency";
        case Encoding::expert: return "expert";
    }
    return "?";
}

Encoding encoding_from_string(std::string_view name) {
    for (Encoding e : kAllEncodings) {
        if (to_string(e) == name) return e;
    }
    throw ParameterError("unknown encoding '" + std::string(name) + "'");
}

EncodedSubgraph encode(const Subgraph& subgraph, Encoding encoding) {
    EncodedSubgraph out;
    out.center = subgraph.center;
    out.encoding = encoding;
    out.edge_spans.reserve(subgraph.edges.size());
    const std::string center = std::to_string(subgraph.center);
    std::string& text = out.text;

    switch (encoding) {
        case Encoding::incident: {
            text = "Node " + center + " is connected to ";
            if (subgraph.edges.empty()) {
                text += "no nodes.";
                break;
            }
            text += "nodes ";
            for (std::size_t i = 0; i < subgraph.edges.size(); ++i) {
                if (i > 0) text += ", ";
                const std::size_t begin = text.size();
                text += std::to_string(subgraph.edges[i]);
                out.edge_spans.push_back({subgraph.edges[i], {begin, text.size()}});
            }
            text += '.';
            break;
        }
        case Encoding::adjacency:
        case Encoding::expert: {
            for (std::size_t i = 0; i < subgraph.edges.size(); ++i) {
                if (i > 0) text += ' ';
                const std::size_t begin = text.size();
                const std::string nbr = std::to_string(subgraph.edges[i]);
                if (encoding == Encoding::adjacency) {
                    text += "(" + center + ", " + nbr + ")";
                } else {
                    text += center + " -> " + nbr;
                }
                out.edge_spans.push_back({subgraph.edges[i], {begin, text.size()}});
            }
            break;
        }
        default:
            throw ParameterError("unknown encoding id");
    }
    return out;
}

GraphSection assemble_graph_section(std::span<const EncodedSubgraph> parts) {
    GraphSection section;
    section.offsets.reserve(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].encoding != parts.front().encoding) {
            throw ParameterError("assemble_graph_section: mixed encodings");
        }
        if (i > 0) section.text += '\n';
        section.offsets.push_back(section.text.size());
        section.text += parts[i].text;
    }
    return section;
}

namespace {

// Minimal cursor over encoded text.
class Scanner {
public:
    explicit Scanner(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    std::size_t pos() const { return pos_; }

    bool literal(std::string_view lit) {
        if (text_.substr(pos_, lit.size()) != lit) return false;
        pos_ += lit.size();
        return true;
    }

    void expect(std::string_view lit) {
        if (!literal(lit)) fail("expected '" + std::string(lit) + "'");
    }

    NodeId number() {
        NodeId value = 0;
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr == first) fail("expected a node id");
        pos_ += static_cast<std::size_t>(ptr - first);
        return value;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParameterError("malformed encoded subgraph at byte " + std::to_string(pos_) + ": " +
                             what);
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<EdgeSpan> scan_edges(std::string_view text, Encoding encoding, NodeId center) {
    std::vector<EdgeSpan> spans;
    Scanner s(text);
    const auto check_center = [&](NodeId c) {
        if (c != center) s.fail("edge does not belong to node " + std::to_string(center));
    };

    if (encoding == Encoding::incident) {
        s.expect("Node ");
        check_center(s.number());
        s.expect(" is connected to ");
        if (s.literal("no nodes.")) {
            if (!s.done()) s.fail("trailing text");
            return spans;
        }
        s.expect("nodes ");
        while (true) {
            const std::size_t begin = s.pos();
            const NodeId nbr = s.number();
            spans.push_back({nbr, {begin, s.pos()}});
            if (s.literal(".")) break;
            s.expect(", ");
        }
        if (!s.done()) s.fail("trailing text");
        return spans;
    }

    while (!s.done()) {
        if (!spans.empty()) s.expect(" ");
        const std::size_t begin = s.pos();
        NodeId nbr = 0;
        if (encoding == Encoding::adjacency) {
            s.expect("(");
            check_center(s.number());
            s.expect(", ");
            nbr = s.number();
            s.expect(")");
        } else {
            check_center(s.number());
            s.expect(" -> ");
            nbr = s.number();
        }
        spans.push_back({nbr, {begin, s.pos()}});
    }
    return spans;
}

std::vector<NodeId> parse_edges(std::string_view text, Encoding encoding, NodeId center) {
    std::vector<NodeId> edges;
    for (const auto& e : scan_edges(text, encoding, center)) edges.push_back(e.neighbor);
    return edges;
}

NodeId parse_center(std::string_view text, Encoding encoding) {
    Scanner s(text);
    if (encoding == Encoding::incident) {
        s.expect("Node ");
    } else if (encoding == Encoding::adjacency) {
        s.expect("(");
    } else if (s.done()) {
        s.fail("empty block has no recoverable center");
    }
    return s.number();
}

}  // namespace lidbench
