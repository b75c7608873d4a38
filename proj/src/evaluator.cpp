#include "lidbench/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <tuple>
#include <unordered_map>

#include "lidbench/error.hpp"
#include "lidbench/rng.hpp"
#include "lidbench/stats.hpp"

namespace lidbench {

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::yes_no: return "yes_no";
        case AnswerKind::integer: return "integer";
        case AnswerKind::degenerate: return "degenerate";
    }
    return "?";
}

std::string_view to_string(Degeneration d) {
    switch (d) {
        case Degeneration::none: return "none";
        case Degeneration::no_final_answer: return "no_final_answer";
        case Degeneration::repetition: return "repetition";
        case Degeneration::self_contradiction: return "self_contradiction";
        case Degeneration::format_violation: return "format_violation";
    }
    return "?";
}

Degeneration degeneration_from_string(std::string_view name) {
    for (auto d : kAllDegenerations) {
        if (to_string(d) == name) return d;
    }
    throw ParameterError("unknown degeneration class '" + std::string(name) + "'");
}

bool ParsedAnswer::correct_for(const TaskInstance& instance) const {
    switch (kind) {
        case AnswerKind::yes_no: return yes && *yes == (instance.ground_truth != 0);
        case AnswerKind::integer: return integer && *integer == instance.ground_truth;
        case AnswerKind::degenerate: return false;
    }
    return false;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?' || c == '\n') {
            flush();
        } else if (is_space(c)) {
            if (!cur.empty() && cur.back() != ' ') cur += ' ';
        } else {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    flush();
    for (auto& s : out) {
        while (!s.empty() && s.back() == ' ') s.pop_back();
    }
    std::erase_if(out, [](const std::string& s) { return s.empty(); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string_view last_nonempty_line(std::string_view text) {
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto nl = rest.rfind('\n');
        const auto line = trim(nl == std::string_view::npos ? rest : rest.substr(nl + 1));
        if (!line.empty()) return line;
        if (nl == std::string_view::npos) break;
        rest = rest.substr(0, nl);
    }
    return {};
}

std::vector<std::string> words(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> digit_runs(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

ParsedAnswer degenerate(Degeneration d) {
    ParsedAnswer p;
    p.kind = AnswerKind::degenerate;
    p.degeneration = d;
    return p;
}

std::optional<bool> yes_no_word(std::string_view line) {
    std::optional<bool> found;
    int count = 0;
    for (const auto& w : words(line)) {
        if (w == "yes" || w == "no") {
            ++count;
            found = w == "yes";
        }
    }
    if (count != 1) return std::nullopt;
    return found;
}

ParsedAnswer parse_plain(std::string_view text, TaskKind task) {
    const auto line = last_nonempty_line(text);
    if (line.empty()) return degenerate(Degeneration::no_final_answer);
    ParsedAnswer p;
    p.degeneration = Degeneration::none;
    if (is_yes_no(task)) {
        auto v = yes_no_word(line);
        if (!v) return degenerate(Degeneration::format_violation);
        p.kind = AnswerKind::yes_no;
        p.yes = v;
        return p;
    }
    const auto ints = digit_runs(line);
    if (ints.size() != 1 || ints[0].size() > 18) return degenerate(Degeneration::format_violation);
    p.kind = AnswerKind::integer;
    p.integer = std::stoll(ints[0]);
    return p;
}

std::optional<std::array<std::int64_t, 2>> stated_subcounts(const std::string& lowered,
                                                            const TaskInstance& t) {
    static const std::regex re(
        R"(common connections between node\s*(\d{1,9})\s*and\s*node\s*(\d{1,9})[ \t*]*(?:is|are|:|=)[ \t*]*(\d{1,9}))");
    std::optional<std::int64_t> ij, jk;
    const auto same = [](NodeId a, NodeId b, NodeId x, NodeId y) {
        return (a == x && b == y) || (a == y && b == x);
    };
    for (auto it = std::sregex_iterator(lowered.begin(), lowered.end(), re); it != std::sregex_iterator(); ++it) {
        const auto a = static_cast<NodeId>(std::stoul((*it)[1].str()));
        const auto b = static_cast<NodeId>(std::stoul((*it)[2].str()));
        const auto n = std::stoll((*it)[3].str());
        if (same(a, b, t.nodes[0], t.nodes[1])) ij = n;
        else if (same(a, b, t.nodes[1], t.nodes[2])) jk = n;
    }
    if (!ij || !jk) return std::nullopt;
    return std::array{*ij, *jk};
}

ParsedAnswer parse_cot(std::string_view text, const TaskInstance& t) {
    const std::string lowered = lower(text);
    const auto pos = lowered.rfind("final answer");
    if (pos == std::string::npos) return degenerate(Degeneration::no_final_answer);
    std::string_view rest = std::string_view(lowered).substr(pos + 12);
    rest = rest.substr(0, rest.find('\n'));
    const auto w = words(rest);
    std::size_t k = 0;
    if (k < w.size() && w[k] == "is") ++k;
    if (k >= w.size() || (w[k] != "yes" && w[k] != "no")) return degenerate(Degeneration::format_violation);
    const bool said = w[k] == "yes";

    ParsedAnswer p;
    if (t.nodes.size() == 3 && t.question_template) {
        p.subcounts = stated_subcounts(lowered, t);
        if (p.subcounts) {
            const auto [ij, jk] = *p.subcounts;
            const bool implied = similarity_answer(static_cast<std::size_t>(ij), static_cast<std::size_t>(jk),
                                                   *t.question_template);
            if (implied != said) {
                auto d = degenerate(Degeneration::self_contradiction);
                d.subcounts = p.subcounts;
                return d;
            }
        }
    }
    p.kind = AnswerKind::yes_no;
    p.yes = said;
    p.degeneration = Degeneration::none;
    return p;
}

}  // namespace

std::size_t longest_repetition(std::string_view text) {
    const auto s = sentences(text);
    std::size_t best = s.empty() ? 0 : 1;
    for (std::size_t period = 1; period <= 3; ++period) {
        std::size_t run = 0;
        for (std::size_t i = period; i < s.size(); ++i) {
            run = s[i] == s[i - period] ? run + 1 : 0;
            best = std::max(best, run / period + 1);
        }
    }
    return best;
}

ParsedAnswer parse_answer(std::string_view text, const TaskInstance& instance, const ParseOptions& options) {
    if (trim(text).empty()) return degenerate(Degeneration::no_final_answer);
    if (longest_repetition(text) >= options.repetition_threshold) return degenerate(Degeneration::repetition);
    return uses_cot(instance.task) ? parse_cot(text, instance) : parse_plain(text, instance.task);
}

ParsedAnswer parse_answer(const ModelResponse& response, const TaskInstance& instance,
                          const ParseOptions& options) {
    if (response.error) return degenerate(Degeneration::no_final_answer);
    return parse_answer(response.text, instance, options);
}

int cell_rank(const TaskInstance& t) {
    switch (t.task) {
        case TaskKind::edge_existence: return t.placement ? static_cast<int>(*t.placement) : 0;
        case TaskKind::common_connection: return t.grid ? (*t.grid)[0] * 3 + ((*t.grid)[1] - 3) : 0;
        case TaskKind::similarity:
            return t.buckets ? static_cast<int>((*t.buckets)[0]) * 3 + static_cast<int>((*t.buckets)[1]) : 0;
    }
    return 0;
}

void to_json(nlohmann::json& j, const ScoredInstance& s) {
    j = {{"id", s.id},
         {"task", to_string(s.task)},
         {"encoding", to_string(s.encoding)},
         {"cell", s.cell},
         {"rank", s.rank},
         {"positions", s.positions},
         {"median_distances", s.median_distances},
         {"prompt_tokens", s.prompt_tokens},
         {"ground_truth", s.ground_truth},
         {"correct", s.correct},
         {"degeneration", to_string(s.degeneration)},
         {"answer", s.answer}};
    if (s.grid) j["grid"] = *s.grid;
}

void from_json(const nlohmann::json& j, ScoredInstance& s) {
    s = ScoredInstance{};
    s.id = j.at("id").get<std::string>();
    s.task = task_from_string(j.at("task").get<std::string>());
    s.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    s.cell = j.at("cell").get<std::string>();
    s.rank = j.at("rank").get<int>();
    if (j.contains("grid")) s.grid = j["grid"].get<GridCell>();
    s.positions = j.at("positions").get<std::vector<double>>();
    s.median_distances = j.at("median_distances").get<std::vector<std::size_t>>();
    s.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
    s.ground_truth = j.at("ground_truth").get<std::int64_t>();
    s.correct = j.at("correct").get<bool>();
    s.degeneration = degeneration_from_string(j.at("degeneration").get<std::string>());
    s.answer = j.at("answer").get<std::string>();
}

ScoredInstance score_instance(const TaskInstance& t, const ModelResponse& r, const ParseOptions& options) {
    const auto parsed = parse_answer(r, t, options);
    ScoredInstance s;
    s.id = t.id;
    s.task = t.task;
    s.encoding = t.encoding;
    s.cell = t.cell_key();
    s.rank = cell_rank(t);
    s.grid = t.grid;
    s.positions = t.positions;
    s.median_distances = t.median_distances;
    s.prompt_tokens = t.prompt_tokens;
    s.ground_truth = t.ground_truth;
    s.correct = parsed.correct_for(t);
    s.degeneration = parsed.degeneration;
    if (parsed.kind == AnswerKind::yes_no) s.answer = *parsed.yes ? "yes" : "no";
    if (parsed.kind == AnswerKind::integer) s.answer = std::to_string(*parsed.integer);
    return s;
}

std::vector<ScoredInstance> score_instances(std::span<const TaskInstance> instances,
                                            std::span<const ModelResponse> responses,
                                            const ParseOptions& options) {
    std::unordered_map<std::string, const ModelResponse*> by_id;
    for (const auto& r : responses) by_id[r.instance_id] = &r;
    std::vector<ScoredInstance> out;
    out.reserve(instances.size());
    for (const auto& t : instances) {
        auto it = by_id.find(t.id);
        if (it == by_id.end()) throw ParameterError("no response for instance " + t.id);
        out.push_back(score_instance(t, *it->second, options));
    }
    return out;
}

void to_json(nlohmann::json& j, const AccuracyCell& c) {
    j = {{"task", to_string(c.task)},
         {"encoding", to_string(c.encoding)},
         {"cell", c.cell},
         {"rank", c.rank},
         {"n", c.n},
         {"correct", c.correct},
         {"accuracy", c.accuracy},
         {"stddev", c.stddev},
         {"degenerate", c.degenerate},
         {"degeneration_rate", c.degeneration_rate},
         {"mean_positions", c.mean_positions}};
}

void from_json(const nlohmann::json& j, AccuracyCell& c) {
    c = AccuracyCell{};
    c.task = task_from_string(j.at("task").get<std::string>());
    c.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    c.cell = j.at("cell").get<std::string>();
    c.rank = j.at("rank").get<int>();
    c.n = j.at("n").get<std::size_t>();
    c.correct = j.at("correct").get<std::size_t>();
    c.accuracy = j.at("accuracy").get<double>();
    c.stddev = j.at("stddev").get<double>();
    c.degenerate = j.at("degenerate").get<std::size_t>();
    c.degeneration_rate = j.at("degeneration_rate").get<double>();
    c.mean_positions = j.at("mean_positions").get<std::vector<double>>();
}

std::vector<AccuracyCell> score(std::span<const ScoredInstance> scored, const ScoreOptions& options) {
    using Key = std::tuple<int, int, int, std::string>;
    std::map<Key, std::vector<const ScoredInstance*>> groups;
    for (const auto& s : scored) {
        groups[{static_cast<int>(s.task), static_cast<int>(s.encoding), s.rank, s.cell}].push_back(&s);
    }
    std::vector<AccuracyCell> cells;
    for (const auto& [key, members] : groups) {
        if (members.empty()) continue;
        AccuracyCell c;
        c.task = members.front()->task;
        c.encoding = members.front()->encoding;
        c.cell = members.front()->cell;
        c.rank = members.front()->rank;
        c.n = members.size();
        std::vector<bool> outcomes;
        outcomes.reserve(c.n);
        const std::size_t dims = members.front()->positions.size();
        std::vector<double> sums(dims, 0.0);
        // Sum positions in id order so the means do not depend on input order.
        auto sorted = members;
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
        for (const auto* s : sorted) {
            outcomes.push_back(s->correct);
            c.correct += s->correct ? 1 : 0;
            c.degenerate += s->degeneration != Degeneration::none ? 1 : 0;
            if (s->positions.size() != dims) throw ParameterError("inconsistent positions in cell " + c.cell);
            for (std::size_t d = 0; d < dims; ++d) sums[d] += s->positions[d];
        }
        for (double& v : sums) v /= static_cast<double>(c.n);
        c.mean_positions = std::move(sums);
        c.accuracy = 100.0 * static_cast<double>(c.correct) / static_cast<double>(c.n);
        c.degeneration_rate = 100.0 * static_cast<double>(c.degenerate) / static_cast<double>(c.n);
        const std::string label = std::string(to_string(c.task)) + "/" + std::string(to_string(c.encoding)) +
                                  "/" + c.cell;
        c.stddev = bootstrap_stddev(std::move(outcomes), options.bootstrap_resamples,
                                    mix_seed(options.seed, hash_label(label)));
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<DegenerationSummary> summarize_degeneration(std::span<const ScoredInstance> scored) {
    std::map<std::pair<int, int>, DegenerationSummary> groups;
    for (const auto& s : scored) {
        auto& g = groups[{static_cast<int>(s.task), static_cast<int>(s.encoding)}];
        g.task = s.task;
        g.encoding = s.encoding;
        ++g.n;
        ++g.counts[static_cast<std::size_t>(s.degeneration)];
    }
    std::vector<DegenerationSummary> out;
    for (auto& [key, g] : groups) {
        const std::size_t bad = g.n - g.counts[0];
        g.rate = g.n ? 100.0 * static_cast<double>(bad) / static_cast<double>(g.n) : 0.0;
        out.push_back(g);
    }
    return out;
}

}  // namespace lidbench
