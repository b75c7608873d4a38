#include "lidbench/task.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <tuple>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"

namespace lidbench {

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::edge_existence: return "edge_existence";
        case TaskKind::common_connection: return "common_connection";
        case TaskKind::similarity: return "similarity";
    }
    return "?";
}

TaskKind task_from_string(std::string_view name) {
    for (auto t : kAllTasks) {
        if (to_string(t) == name) return t;
    }
    throw ParameterError("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(Placement p) {
    switch (p) {
        case Placement::beginning: return "beginning";
        case Placement::middle: return "middle";
        case Placement::end: return "end";
    }
    return "?";
}

Placement placement_from_string(std::string_view name) {
    for (auto p : kAllPlacements) {
        if (to_string(p) == name) return p;
    }
    throw ParameterError("unknown placement '" + std::string(name) + "'");
}

std::string TaskInstance::cell_key() const {
    switch (task) {
        case TaskKind::edge_existence:
            return placement ? std::string(to_string(*placement)) : "";
        case TaskKind::common_connection:
            return grid ? std::to_string((*grid)[0]) + "," + std::to_string((*grid)[1]) : "";
        case TaskKind::similarity:
            return buckets ? std::string(to_string((*buckets)[0])) + "," +
                                 std::string(to_string((*buckets)[1]))
                           : "";
    }
    return "";
}

// ---------------------------------------------------------------------------
// Prompt text

std::string_view system_prompt() {
    return "You are a helpful assistant that answers questions about graphs.";
}

namespace {

std::string node(NodeId v) { return "node " + std::to_string(v); }

std::string description(Encoding encoding, std::size_t node_count) {
    std::string s = "In an undirected graph, the nodes are numbered from 0 to " +
                    std::to_string(node_count - 1) + ", and ";
    switch (encoding) {
        case Encoding::incident:
            s += "each line below lists the nodes that one node is connected to.";
            break;
        case Encoding::adjacency:
            s += "each pair (i, j) below means that node i and node j are connected.";
            break;
        case Encoding::expert:
            s += "each arrow i -> j below means that node i and node j are connected.";
            break;
    }
    return s;
}

std::string edge_existence_question(NodeId a, NodeId b) {
    return "Question: Is there an edge between " + node(a) + " and " + node(b) +
           "?\nAnswer with yes or no.";
}

std::string common_connection_question(NodeId a, NodeId b) {
    return "Question: How many common connections do " + node(a) + " and " + node(b) +
           " have? A common connection is a node that is connected to both of them.\n"
           "Answer with a single integer.";
}

std::string similarity_instructions(SimilarityTemplate t, NodeId i, NodeId j, NodeId k) {
    const std::string ij = "between " + node(i) + " and " + node(j);
    const std::string jk = "between " + node(j) + " and " + node(k);
    return "Question: " + similarity_question(t, i, j, k) +
           "\nSolve this step by step. First, find the common connections " + ij +
           " and count them. Then, find the common connections " + jk +
           " and count them. Finally, compare the two counts to answer the question.\n"
           "End your response with exactly these three lines:\n"
           "Number of common connections " + ij + ": <count>\n"
           "Number of common connections " + jk + ": <count>\n"
           "Final answer: <yes or no>";
}

struct AssembledPrompt {
    std::string text;
    std::size_t section_offset = 0;
    std::vector<std::size_t> block_offsets;  // absolute, into text
};

AssembledPrompt assemble(Encoding encoding, std::size_t node_count,
                         std::span<const EncodedSubgraph> blocks, const std::string& question) {
    AssembledPrompt p;
    p.text = description(encoding, node_count) + "\n";
    p.section_offset = p.text.size();
    auto section = assemble_graph_section(blocks);
    p.text += section.text;
    p.text += "\n" + question;
    for (auto off : section.offsets) p.block_offsets.push_back(p.section_offset + off);
    return p;
}

double token_midpoint(const TokenMap& map, std::size_t begin, std::size_t end) {
    const double mid = (static_cast<double>(map.char_to_token(begin)) +
                        static_cast<double>(map.char_to_token(end))) /
                       2.0;
    return map.token_count() ? mid / static_cast<double>(map.token_count()) : 0.0;
}

CharSpan shifted(CharSpan s, std::size_t by) { return {s.begin + by, s.end + by}; }

const EdgeSpan& span_of(const EncodedSubgraph& block, NodeId nbr) {
    for (const auto& e : block.edge_spans) {
        if (e.neighbor == nbr) return e;
    }
    throw Error("neighbor " + std::to_string(nbr) + " missing from encoded block");
}

std::vector<CommonOccurrence> occurrences(const EncodedSubgraph& first, std::size_t first_off,
                                          const EncodedSubgraph& second, std::size_t second_off,
                                          std::span<const NodeId> common) {
    std::vector<CommonOccurrence> out;
    out.reserve(common.size());
    for (NodeId v : common) {
        out.push_back({v, shifted(span_of(first, v).span, first_off),
                       shifted(span_of(second, v).span, second_off)});
    }
    return out;
}

void finish(TaskInstance& t, const Tokenizer& tokenizer) {
    t.system_prompt = std::string(system_prompt());
    t.tokenizer_id = tokenizer.id();
    t.input_tokens = t.prompt_tokens + tokenizer.count(t.system_prompt);
}

}  // namespace

std::string similarity_question(SimilarityTemplate t, NodeId i, NodeId j, NodeId k) {
    const std::string ij = "between " + node(i) + " and " + node(j);
    const std::string jk = "between " + node(j) + " and " + node(k);
    const bool jk_first = t == SimilarityTemplate::greater_jk_over_ij;
    return "Is the number of common connections " + (jk_first ? jk : ij) +
           " greater than the number of common connections " + (jk_first ? ij : jk) + "?";
}

std::vector<NodeId> group_common_block(std::span<const NodeId> edges,
                                       std::span<const NodeId> common, int slot) {
    if (slot < 0 || slot > 2) throw ParameterError("block slot must be 0, 1 or 2");
    std::vector<NodeId> block;
    std::vector<NodeId> rest;
    for (NodeId v : edges) {
        (std::binary_search(common.begin(), common.end(), v) ? block : rest).push_back(v);
    }
    std::sort(block.begin(), block.end());
    std::sort(rest.begin(), rest.end());
    const std::size_t before = slot == 0 ? 0 : slot == 1 ? rest.size() / 2 : rest.size();
    std::vector<NodeId> out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(before));
    out.insert(out.end(), block.begin(), block.end());
    out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(before), rest.end());
    return out;
}

std::vector<NodeId> sample_noise_nodes(const Graph& graph, NodeId a, NodeId b, std::size_t count,
                                       Rng& rng) {
    const NodeId exclude[] = {a, b};
    return sample_distinct_nodes(graph, count, rng, exclude);
}

TaskInstance build_edge_existence(const Graph& graph, NodeId a, NodeId b,
                                  std::span<const NodeId> noise, Placement placement,
                                  Encoding encoding, const Tokenizer& tokenizer) {
    if (a == b) throw ParameterError("edge existence needs two distinct nodes");
    for (NodeId v : noise) {
        if (v == a || v == b) throw ParameterError("noise nodes must differ from the interest pair");
    }
    const std::size_t k = noise.size();
    const std::size_t first = placement == Placement::beginning ? 0
                              : placement == Placement::middle ? k / 2
                                                               : k;
    std::vector<EncodedSubgraph> blocks;
    blocks.reserve(k + 2);
    for (std::size_t i = 0; i < first; ++i) blocks.push_back(encode(subgraph_of(graph, noise[i]), encoding));
    blocks.push_back(encode(subgraph_of(graph, a), encoding));
    blocks.push_back(encode(subgraph_of(graph, b), encoding));
    for (std::size_t i = first; i < k; ++i) blocks.push_back(encode(subgraph_of(graph, noise[i]), encoding));

    TaskInstance t;
    t.task = TaskKind::edge_existence;
    t.encoding = encoding;
    t.ground_truth = edge_exists(graph, a, b) ? 1 : 0;
    t.placement = placement;
    t.graph = graph.params();
    t.nodes = {a, b};
    t.noise_nodes.assign(noise.begin(), noise.end());

    auto p = assemble(encoding, graph.node_count(), blocks, edge_existence_question(a, b));
    TokenMap map(p.text, tokenizer);
    t.prompt_tokens = map.token_count();
    const std::size_t begin = p.block_offsets[first];
    const std::size_t end = p.block_offsets[first + 1] + blocks[first + 1].text.size();
    t.positions = {token_midpoint(map, begin, end)};
    t.prompt = std::move(p.text);
    finish(t, tokenizer);
    return t;
}

TaskInstance build_common_connection(const Graph& graph, NodeId a, NodeId b, GridCell cell,
                                     Encoding encoding, const Tokenizer& tokenizer) {
    if (cell[0] < 0 || cell[0] > 2 || cell[1] < 3 || cell[1] > 5) {
        throw ParameterError("common connection cell must satisfy p1 in {0,1,2}, p2 in {3,4,5}");
    }
    const auto common = common_connections(graph, a, b);
    if (common.empty()) throw RejectedSample("nodes share no common connection");

    const auto na = graph.neighbors(a);
    const auto nb = graph.neighbors(b);
    const EncodedSubgraph blocks[] = {
        encode({a, group_common_block(na, common, cell[0])}, encoding),
        encode({b, group_common_block(nb, common, cell[1] - 3)}, encoding),
    };

    TaskInstance t;
    t.task = TaskKind::common_connection;
    t.encoding = encoding;
    t.ground_truth = static_cast<std::int64_t>(common.size());
    t.grid = cell;
    t.graph = graph.params();
    t.nodes = {a, b};

    auto p = assemble(encoding, graph.node_count(), blocks, common_connection_question(a, b));
    TokenMap map(p.text, tokenizer);
    t.prompt_tokens = map.token_count();
    for (int side = 0; side < 2; ++side) {
        const auto& block = blocks[side];
        // The block is contiguous and ascending, so its ends are the first and
        // last common ids.
        const std::size_t off = p.block_offsets[static_cast<std::size_t>(side)];
        const std::size_t begin = off + span_of(block, common.front()).span.begin;
        const std::size_t end = off + span_of(block, common.back()).span.end;
        t.positions.push_back(token_midpoint(map, begin, end));
    }
    const auto occ = occurrences(blocks[0], p.block_offsets[0], blocks[1], p.block_offsets[1], common);
    t.median_distances = {*median_common_distance(map, occ)};
    t.prompt = std::move(p.text);
    finish(t, tokenizer);
    return t;
}

TaskInstance build_similarity(const Graph& graph, NodeId target1, NodeId source, NodeId target2,
                              Encoding encoding, SimilarityTemplate question,
                              std::uint64_t shuffle_seed, const Tokenizer& tokenizer,
                              const BucketThresholds& thresholds) {
    const auto common_ij = common_connections(graph, target1, source);
    const auto common_jk = common_connections(graph, source, target2);
    if (target1 == target2) throw ParameterError("similarity needs three distinct nodes");
    if (common_ij.empty() || common_jk.empty()) {
        throw RejectedSample("similarity triple has an empty common set");
    }

    const Rng base(shuffle_seed);
    const NodeId order[] = {target1, source, target2};
    std::vector<EncodedSubgraph> blocks;
    for (std::size_t r = 0; r < 3; ++r) {
        auto sub = subgraph_of(graph, order[r]);
        base.split(r).shuffle(std::span<NodeId>(sub.edges));
        blocks.push_back(encode(sub, encoding));
    }

    TaskInstance t;
    t.task = TaskKind::similarity;
    t.encoding = encoding;
    t.ground_truth = similarity_answer(common_ij.size(), common_jk.size(), question) ? 1 : 0;
    t.graph = graph.params();
    t.nodes = {target1, source, target2};
    t.question_template = question;
    t.shuffle_seed = shuffle_seed;

    auto p = assemble(encoding, graph.node_count(), blocks,
                      similarity_instructions(question, target1, source, target2));
    TokenMap map(p.text, tokenizer);
    t.prompt_tokens = map.token_count();
    for (std::size_t r = 0; r < 3; ++r) {
        t.positions.push_back(
            token_midpoint(map, p.block_offsets[r], p.block_offsets[r] + blocks[r].text.size()));
    }
    const auto occ_ij =
        occurrences(blocks[0], p.block_offsets[0], blocks[1], p.block_offsets[1], common_ij);
    const auto occ_jk =
        occurrences(blocks[1], p.block_offsets[1], blocks[2], p.block_offsets[2], common_jk);
    const std::size_t d1 = *median_common_distance(map, occ_ij);
    const std::size_t d2 = *median_common_distance(map, occ_jk);
    t.median_distances = {d1, d2};
    t.buckets = std::array{bucketize(d1, thresholds), bucketize(d2, thresholds)};
    t.prompt = std::move(p.text);
    finish(t, tokenizer);
    return t;
}

TaskInstance rebuild(const TaskInstance& prov, const Tokenizer& tokenizer,
                     const BucketThresholds& thresholds) {
    const Graph graph = generate_er(prov.graph);
    TaskInstance t;
    switch (prov.task) {
        case TaskKind::edge_existence:
            if (prov.nodes.size() != 2 || !prov.placement) throw ParameterError("bad provenance");
            t = build_edge_existence(graph, prov.nodes[0], prov.nodes[1], prov.noise_nodes,
                                     *prov.placement, prov.encoding, tokenizer);
            break;
        case TaskKind::common_connection:
            if (prov.nodes.size() != 2 || !prov.grid) throw ParameterError("bad provenance");
            t = build_common_connection(graph, prov.nodes[0], prov.nodes[1], *prov.grid,
                                        prov.encoding, tokenizer);
            break;
        case TaskKind::similarity:
            if (prov.nodes.size() != 3 || !prov.question_template || !prov.shuffle_seed) {
                throw ParameterError("bad provenance");
            }
            t = build_similarity(graph, prov.nodes[0], prov.nodes[1], prov.nodes[2], prov.encoding,
                                 *prov.question_template, *prov.shuffle_seed, tokenizer,
                                 thresholds);
            break;
    }
    t.id = prov.id;
    return t;
}

namespace {

struct ScannedBlock {
    std::size_t offset = 0;
    std::map<NodeId, CharSpan> spans;  // absolute
};

// Line 0 is the description; lines 1..3 are the three blocks.
std::array<ScannedBlock, 3> scan_similarity_blocks(const TaskInstance& instance) {
    if (instance.task != TaskKind::similarity) {
        throw ParameterError("expected a similarity instance");
    }
    const std::string_view text = instance.prompt;
    std::vector<std::size_t> line_starts{0};
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') line_starts.push_back(i + 1);
    }
    if (line_starts.size() < 5) throw ParameterError("similarity prompt has too few lines");

    std::array<ScannedBlock, 3> blocks;
    for (std::size_t r = 0; r < 3; ++r) {
        const std::size_t begin = line_starts[r + 1];
        const std::string_view line = text.substr(begin, line_starts[r + 2] - 1 - begin);
        const NodeId center = parse_center(line, instance.encoding);
        blocks[r].offset = begin;
        for (const auto& e : scan_edges(line, instance.encoding, center)) {
            blocks[r].spans.emplace(e.neighbor, shifted(e.span, begin));
        }
    }
    return blocks;
}

}  // namespace

std::array<std::size_t, 2> recompute_similarity_distances(const TaskInstance& instance,
                                                          const Tokenizer& tokenizer) {
    const auto blocks = scan_similarity_blocks(instance);
    const TokenMap map(instance.prompt, tokenizer);
    std::array<std::size_t, 2> out{};
    for (std::size_t pair = 0; pair < 2; ++pair) {
        const auto& first = blocks[pair];
        const auto& second = blocks[pair + 1];
        std::vector<std::size_t> distances;
        for (const auto& [v, span] : first.spans) {
            auto it = second.spans.find(v);
            if (it != second.spans.end()) distances.push_back(occurrence_distance(map, span, it->second));
        }
        auto med = median_of(std::move(distances));
        if (!med) throw ParameterError("similarity prompt blocks share no node");
        out[pair] = *med;
    }
    return out;
}

std::array<std::vector<NodeId>, 3> similarity_block_neighbors(const TaskInstance& instance) {
    const auto blocks = scan_similarity_blocks(instance);
    std::array<std::vector<NodeId>, 3> out;
    for (std::size_t r = 0; r < 3; ++r) {
        for (const auto& entry : blocks[r].spans) out[r].push_back(entry.first);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json& j, const TaskInstance& t) {
    j = nlohmann::json::object();
    j["id"] = t.id;
    j["task"] = to_string(t.task);
    j["encoding"] = to_string(t.encoding);
    j["ground_truth"] = t.ground_truth;
    if (t.placement) j["placement"] = to_string(*t.placement);
    if (t.grid) j["grid"] = *t.grid;
    if (t.buckets) j["buckets"] = {to_string((*t.buckets)[0]), to_string((*t.buckets)[1])};
    j["median_distances"] = t.median_distances;
    j["positions"] = t.positions;
    j["prompt_tokens"] = t.prompt_tokens;
    j["input_tokens"] = t.input_tokens;
    j["graph"] = {{"node_count", t.graph.node_count},
                  {"density", t.graph.density},
                  {"seed", t.graph.seed}};
    j["nodes"] = t.nodes;
    if (!t.noise_nodes.empty()) j["noise_nodes"] = t.noise_nodes;
    if (t.question_template) j["template"] = to_string(*t.question_template);
    if (t.shuffle_seed) j["shuffle_seed"] = *t.shuffle_seed;
    j["tokenizer"] = t.tokenizer_id;
    j["system_prompt"] = t.system_prompt;
    j["prompt"] = t.prompt;
}

void from_json(const nlohmann::json& j, TaskInstance& t) {
    t = TaskInstance{};
    t.id = j.at("id").get<std::string>();
    t.task = task_from_string(j.at("task").get<std::string>());
    t.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    t.ground_truth = j.at("ground_truth").get<std::int64_t>();
    if (j.contains("placement")) t.placement = placement_from_string(j["placement"].get<std::string>());
    if (j.contains("grid")) t.grid = j["grid"].get<GridCell>();
    if (j.contains("buckets")) {
        t.buckets = std::array{distance_label_from_string(j["buckets"][0].get<std::string>()),
                               distance_label_from_string(j["buckets"][1].get<std::string>())};
    }
    t.median_distances = j.at("median_distances").get<std::vector<std::size_t>>();
    t.positions = j.at("positions").get<std::vector<double>>();
    t.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
    t.input_tokens = j.at("input_tokens").get<std::size_t>();
    const auto& g = j.at("graph");
    t.graph = {g.at("node_count").get<std::size_t>(), g.at("density").get<double>(),
               g.at("seed").get<std::uint64_t>()};
    t.nodes = j.at("nodes").get<std::vector<NodeId>>();
    if (j.contains("noise_nodes")) t.noise_nodes = j["noise_nodes"].get<std::vector<NodeId>>();
    if (j.contains("template")) {
        t.question_template = similarity_template_from_string(j["template"].get<std::string>());
    }
    if (j.contains("shuffle_seed")) t.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
    t.tokenizer_id = j.at("tokenizer").get<std::string>();
    t.system_prompt = j.at("system_prompt").get<std::string>();
    t.prompt = j.at("prompt").get<std::string>();
}

std::string serialize_corpus(const CorpusHeader& h, std::span<const TaskInstance> instances) {
    nlohmann::json header = {
        {"format", kCorpusFormat},
        {"version", kCorpusVersion},
        {"encoding_format", kEncodingFormatVersion},
        {"prompt_format", kPromptFormatVersion},
        {"task", to_string(h.task)},
        {"encoding", to_string(h.encoding)},
        {"tokenizer", h.tokenizer_id},
        {"vocabulary_hash", h.vocabulary_hash},
        {"thresholds", {{"small_max", h.thresholds.small_max}, {"medium_max", h.thresholds.medium_max}}},
        {"graph", {{"node_count", h.graph.node_count}, {"density", h.graph.density}, {"seed", h.graph.seed}}},
        {"rng", std::string(Rng::kAlgorithm) + "/" + std::to_string(Rng::kVersion)},
        {"instance_count", instances.size()},
    };
    std::string out = header.dump() + "\n";
    for (const auto& t : instances) out += nlohmann::json(t).dump() + "\n";
    return out;
}

Corpus read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus " + path.string());
    Corpus c;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty corpus file " + path.string());
    const auto h = nlohmann::json::parse(line);
    if (h.value("format", "") != kCorpusFormat || h.value("version", 0) != kCorpusVersion) {
        throw IoError(path.string() + " is not a version " + std::to_string(kCorpusVersion) +
                      " corpus file");
    }
    c.header.task = task_from_string(h.at("task").get<std::string>());
    c.header.encoding = encoding_from_string(h.at("encoding").get<std::string>());
    c.header.tokenizer_id = h.at("tokenizer").get<std::string>();
    c.header.vocabulary_hash = h.at("vocabulary_hash").get<std::string>();
    c.header.thresholds = {h.at("thresholds").at("small_max").get<std::size_t>(),
                           h.at("thresholds").at("medium_max").get<std::size_t>()};
    c.header.graph = {h.at("graph").at("node_count").get<std::size_t>(),
                      h.at("graph").at("density").get<double>(),
                      h.at("graph").at("seed").get<std::uint64_t>()};
    c.header.instance_count = h.at("instance_count").get<std::size_t>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        c.instances.push_back(nlohmann::json::parse(line).get<TaskInstance>());
    }
    if (c.instances.size() != c.header.instance_count) {
        throw IoError(path.string() + ": header promises " +
                      std::to_string(c.header.instance_count) + " instances, found " +
                      std::to_string(c.instances.size()));
    }
    return c;
}


void write_corpus(const std::filesystem::path& path, const CorpusHeader& header,
                  std::span<const TaskInstance> instances) {
    write_file_atomic(path, serialize_corpus(header, instances));
}

// ---------------------------------------------------------------------------
// Corpus sampling

namespace {

class GraphStream {
public:
    explicit GraphStream(const CorpusSpec& spec) : spec_(spec) {
        if (spec.samples_per_graph == 0) throw ParameterError("samples_per_graph must be positive");
    }

    const Graph& for_draw(std::size_t draw) {
        const std::size_t index = draw / spec_.samples_per_graph;
        if (!current_ || index != index_) {
            graph_ = generate_er(spec_.node_count, spec_.density, mix_seed(spec_.seed, index));
            index_ = index;
            current_ = true;
        }
        return graph_;
    }

private:
    const CorpusSpec& spec_;
    Graph graph_;
    std::size_t index_ = 0;
    bool current_ = false;
};

std::string instance_id(const CorpusSpec& spec, std::size_t sample, std::string_view suffix) {
    char num[32];
    std::snprintf(num, sizeof num, "%06zu", sample);
    std::string id = std::string(to_string(spec.task)) + "-" + std::string(to_string(spec.encoding)) +
                     "-" + num;
    if (!suffix.empty()) id += "-" + std::string(suffix);
    return id;
}

void check_spec(const CorpusSpec& spec, TaskKind expected) {
    if (spec.task != expected) throw ParameterError("corpus spec task mismatch");
    if (spec.node_count < 2) throw ParameterError("node_count must be at least 2");
    if (!(spec.density >= 0.0 && spec.density <= 1.0)) throw ParameterError("density must lie in [0, 1]");
    if (spec.per_cell == 0) throw ParameterError("per_cell must be positive");
}

// Draws an ordered pair of distinct nodes meeting the degree floor; nullopt
// when the draw is rejected.
std::optional<std::array<NodeId, 2>> draw_pair(const Graph& graph, Rng& rng, std::size_t min_degree) {
    const auto a = static_cast<NodeId>(rng.below(graph.node_count()));
    const auto b = static_cast<NodeId>(rng.below(graph.node_count()));
    if (a == b || graph.degree(a) < min_degree || graph.degree(b) < min_degree) return std::nullopt;
    return std::array{a, b};
}

[[noreturn]] void partial(const CorpusSpec& spec, std::vector<std::string> unfilled) {
    std::string msg = "sampling budget of " + std::to_string(spec.max_attempts) +
                      " attempts exhausted for " + std::string(to_string(spec.task)) + "/" +
                      std::string(to_string(spec.encoding)) + "; unfilled cells:";
    for (const auto& c : unfilled) msg += " " + c;
    throw PartialCorpusError(msg, std::move(unfilled));
}

}  // namespace

std::vector<TaskInstance> sample_edge_existence_corpus(const CorpusSpec& spec,
                                                       const Tokenizer& tokenizer) {
    check_spec(spec, TaskKind::edge_existence);
    GraphStream graphs(spec);
    const Rng master = Rng(spec.seed).split(hash_label("edge_existence"));
    std::vector<TaskInstance> out;
    out.reserve(spec.per_cell * 3);
    std::size_t attempts = 0;
    for (std::size_t s = 0; s < spec.per_cell; ++s) {
        const Graph& graph = graphs.for_draw(s);
        Rng rng = master.split(s);
        const bool want_edge = s % 2 == 0;
        std::optional<std::array<NodeId, 2>> pair;
        while (!pair) {
            if (attempts++ >= spec.max_attempts) {
                std::vector<std::string> cells;
                for (auto p : kAllPlacements) cells.emplace_back(to_string(p));
                partial(spec, std::move(cells));
            }
            pair = draw_pair(graph, rng, spec.min_degree);
            if (pair && edge_exists(graph, (*pair)[0], (*pair)[1]) != want_edge) pair.reset();
        }
        const auto noise = sample_noise_nodes(graph, (*pair)[0], (*pair)[1], spec.noise_count, rng);
        for (auto placement : kAllPlacements) {
            auto t = build_edge_existence(graph, (*pair)[0], (*pair)[1], noise, placement,
                                          spec.encoding, tokenizer);
            t.id = instance_id(spec, s, to_string(placement));
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<TaskInstance> sample_common_connection_corpus(const CorpusSpec& spec,
                                                          const Tokenizer& tokenizer) {
    check_spec(spec, TaskKind::common_connection);
    GraphStream graphs(spec);
    const Rng master = Rng(spec.seed).split(hash_label("common_connection"));
    std::vector<TaskInstance> out;
    out.reserve(spec.per_cell * 9);
    std::size_t attempts = 0;
    for (std::size_t s = 0; s < spec.per_cell; ++s) {
        const Graph& graph = graphs.for_draw(s);
        Rng rng = master.split(s);
        std::optional<std::array<NodeId, 2>> pair;
        while (!pair) {
            if (attempts++ >= spec.max_attempts) {
                std::vector<std::string> cells;
                for (int p1 = 0; p1 < 3; ++p1) {
                    for (int p2 = 3; p2 < 6; ++p2) cells.push_back(std::to_string(p1) + "," + std::to_string(p2));
                }
                partial(spec, std::move(cells));
            }
            pair = draw_pair(graph, rng, spec.min_degree);
            if (pair && common_connections(graph, (*pair)[0], (*pair)[1]).empty()) pair.reset();
        }
        for (int p1 = 0; p1 < 3; ++p1) {
            for (int p2 = 3; p2 < 6; ++p2) {
                auto t = build_common_connection(graph, (*pair)[0], (*pair)[1], GridCell{p1, p2},
                                                 spec.encoding, tokenizer);
                t.id = instance_id(spec, s, std::to_string(p1) + "-" + std::to_string(p2));
                out.push_back(std::move(t));
            }
        }
    }
    return out;
}

std::vector<TaskInstance> sample_similarity_corpus(const CorpusSpec& spec,
                                                   const Tokenizer& tokenizer) {
    check_spec(spec, TaskKind::similarity);
    if (spec.per_cell % 2 != 0) throw ParameterError("similarity per_cell must be even");
    if (spec.node_count < 3) throw ParameterError("similarity needs at least three nodes");
    const std::size_t quota = spec.per_cell / 2;  // per (cell, answer)

    // filled[d1][d2][answer]
    std::array<std::array<std::array<std::size_t, 2>, 3>, 3> filled{};
    std::array<std::size_t, 2> answer_filled{};  // summed over cells
    const std::size_t total_per_answer = quota * 9;

    auto unfilled_cells = [&] {
        std::vector<std::string> cells;
        for (auto l1 : kAllDistanceLabels) {
            for (auto l2 : kAllDistanceLabels) {
                const auto& f = filled[static_cast<int>(l1)][static_cast<int>(l2)];
                if (f[0] < quota || f[1] < quota) {
                    cells.push_back(std::string(to_string(l1)) + "," + std::string(to_string(l2)));
                }
            }
        }
        return cells;
    };

    // An empty graph can never produce a common connection.
    if (spec.density == 0.0) partial(spec, unfilled_cells());

    GraphStream graphs(spec);
    const Rng master = Rng(spec.seed).split(hash_label("similarity"));
    std::vector<TaskInstance> accepted;
    accepted.reserve(spec.per_cell * 9);
    for (std::size_t attempt = 0; answer_filled[0] + answer_filled[1] < 2 * total_per_answer;
         ++attempt) {
        if (attempt >= spec.max_attempts) partial(spec, unfilled_cells());
        const Graph& graph = graphs.for_draw(attempt);
        Rng rng = master.split(attempt);
        const auto i = static_cast<NodeId>(rng.below(graph.node_count()));
        const auto j = static_cast<NodeId>(rng.below(graph.node_count()));
        const auto k = static_cast<NodeId>(rng.below(graph.node_count()));
        const auto question = rng.below(2) == 0 ? SimilarityTemplate::greater_jk_over_ij
                                                : SimilarityTemplate::greater_ij_over_jk;
        const std::uint64_t shuffle_seed = rng.next();
        if (i == j || j == k || i == k) continue;
        if (graph.degree(i) < spec.min_degree || graph.degree(j) < spec.min_degree ||
            graph.degree(k) < spec.min_degree) {
            continue;
        }
        const auto c_ij = common_connections(graph, i, j).size();
        const auto c_jk = common_connections(graph, j, k).size();
        if (c_ij == 0 || c_jk == 0) continue;
        const int answer = similarity_answer(c_ij, c_jk, question) ? 1 : 0;
        if (answer_filled[answer] == total_per_answer) continue;

        auto t = build_similarity(graph, i, j, k, spec.encoding, question, shuffle_seed, tokenizer,
                                  spec.thresholds);
        auto& slot = filled[static_cast<int>((*t.buckets)[0])][static_cast<int>((*t.buckets)[1])];
        if (slot[answer] == quota) continue;
        ++slot[answer];
        ++answer_filled[answer];
        accepted.push_back(std::move(t));
    }

    // Stable order: by cell, then answer, then acceptance order.
    std::stable_sort(accepted.begin(), accepted.end(), [](const TaskInstance& a, const TaskInstance& b) {
        return std::tuple((*a.buckets)[0], (*a.buckets)[1], a.ground_truth) <
               std::tuple((*b.buckets)[0], (*b.buckets)[1], b.ground_truth);
    });
    for (std::size_t n = 0; n < accepted.size(); ++n) accepted[n].id = instance_id(spec, n, "");
    return accepted;
}

std::vector<TaskInstance> sample_corpus(const CorpusSpec& spec, const Tokenizer& tokenizer) {
    switch (spec.task) {
        case TaskKind::edge_existence: return sample_edge_existence_corpus(spec, tokenizer);
        case TaskKind::common_connection: return sample_common_connection_corpus(spec, tokenizer);
        case TaskKind::similarity: return sample_similarity_corpus(spec, tokenizer);
    }
    throw ParameterError("unknown task");
}

}  // namespace lidbench
