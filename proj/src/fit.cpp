#include "lidbench/fit.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lidbench/error.hpp"
#include "lidbench/rng.hpp"

namespace lidbench {

PiecewiseLinear estimate_G(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw FitError("estimating G needs at least two measured positions");
    std::sort(points.begin(), points.end());
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].first == points[i - 1].first) throw FitError("two G measurements share one position");
    }
    return PiecewiseLinear(std::move(points));
}

namespace {

double product(const PiecewiseLinear& G, const SurfaceCell& c) { return G(c.p1) / 100.0 * (G(c.p2) / 100.0); }

double clamp_pct(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

double estimate_gamma(std::span<const SurfaceCell> cells, const PiecewiseLinear& G_hat) {
    if (cells.empty()) throw FitError("estimating gamma needs at least one training cell");
    double num = 0.0;
    double den = 0.0;
    for (const auto& c : cells) {
        const double g = product(G_hat, c);
        num += c.accuracy / 100.0 * g;
        den += g * g;
    }
    if (den == 0.0) throw FitError("every G(p1) G(p2) product is zero; gamma is undefined");
    return num / den;
}

double HEstimate::at(int d) const {
    for (const auto& c : classes) {
        if (std::find(c.members.begin(), c.members.end(), d) != c.members.end()) return c.H;
    }
    return 1.0;
}

HEstimate estimate_H(std::span<const SurfaceCell> cells, double gamma_hat, const PiecewiseLinear& G_hat,
                     double floor, std::size_t min_class_cells) {
    if (!(gamma_hat > 0.0)) throw FitError("estimating H needs a positive gamma");
    struct Group {
        std::vector<int> members;
        std::vector<double> ratios;
        std::vector<double> distances;
    };
    std::map<int, Group> by_class;
    HEstimate out;
    for (const auto& c : cells) {
        const double denom = gamma_hat * product(G_hat, c);
        if (denom < floor) {
            ++out.excluded;
            continue;
        }
        auto& g = by_class[c.distance_class];
        g.ratios.push_back(c.accuracy / 100.0 / denom);
        g.distances.push_back(c.distance);
    }
    std::vector<Group> groups;
    for (auto& [d, g] : by_class) {
        g.members = {d};
        groups.push_back(std::move(g));
    }
    for (;;) {
        auto small = std::find_if(groups.begin(), groups.end(),
                                  [&](const Group& g) { return g.ratios.size() < min_class_cells; });
        if (small == groups.end() || groups.size() < 2) break;
        auto into = small + 1 != groups.end() ? small + 1 : small - 1;
        into->members.insert(into->members.end(), small->members.begin(), small->members.end());
        into->ratios.insert(into->ratios.end(), small->ratios.begin(), small->ratios.end());
        into->distances.insert(into->distances.end(), small->distances.begin(), small->distances.end());
        std::sort(into->members.begin(), into->members.end());
        groups.erase(small);
    }
    for (const auto& g : groups) {
        DistanceClass dc;
        dc.members = g.members;
        dc.cells = g.ratios.size();
        dc.H = mean(g.ratios);
        dc.distance = mean(g.distances);
        if (dc.cells >= 2) {
            double ss = 0.0;
            for (double r : g.ratios) ss += (r - dc.H) * (r - dc.H);
            dc.standard_error = std::sqrt(ss / static_cast<double>(dc.cells - 1)) /
                                std::sqrt(static_cast<double>(dc.cells));
        }
        out.classes.push_back(std::move(dc));
    }
    return out;
}

FitResult compare_models(std::span<const ScoredInstance> edge_existence,
                         std::span<const ScoredInstance> common_connection, const FitOptions& options) {
    if (common_connection.empty()) throw FitError("no common-connection results to fit");
    FitResult result;
    result.encoding = common_connection.front().encoding;
    result.split_seed = options.split_seed;

    // G from every edge-existence sample, one point per placement.
    std::map<int, std::vector<const ScoredInstance*>> placements;
    for (const auto& s : edge_existence) {
        if (s.task != TaskKind::edge_existence || s.encoding != result.encoding || s.positions.size() != 1) {
            throw FitError("edge-existence input must hold single-position results of one encoding");
        }
        placements[s.rank].push_back(&s);
    }
    std::vector<std::pair<double, double>> points;
    for (auto& [rank, members] : placements) {
        std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->id < b->id; });
        double pos = 0.0;
        std::size_t hits = 0;
        for (const auto* s : members) {
            pos += s->positions[0];
            hits += s->correct ? 1 : 0;
        }
        const auto n = static_cast<double>(members.size());
        points.emplace_back(pos / n, 100.0 * static_cast<double>(hits) / n);
    }
    result.G_hat = estimate_G(std::move(points));

    std::map<std::pair<int, std::string>, std::vector<const ScoredInstance*>> cells;
    for (const auto& s : common_connection) {
        if (s.task != TaskKind::common_connection || s.encoding != result.encoding || !s.grid ||
            s.positions.size() != 2) {
            throw FitError("common-connection input must hold grid results of one encoding");
        }
        cells[{s.rank, s.cell}].push_back(&s);
    }
    if (cells.size() < 2) throw FitError("fitting needs at least two common-connection cells");

    std::vector<SurfaceCell> train;
    std::vector<SurfaceCell> test;
    double variance_sum = 0.0;
    for (auto& [key, members] : cells) {
        if (members.size() < 2) throw FitError("cell " + key.second + " has fewer than two samples to split");
        std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->id < b->id; });
        Rng(mix_seed(options.split_seed, hash_label(key.second))).shuffle(std::span(members));
        const std::size_t n_train = members.size() / 2;

        CellFit cf;
        cf.cell = key.second;
        cf.grid = *members.front()->grid;
        // Positions averaged in id order so the split does not move them.
        auto ordered = members;
        std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
        for (const auto* s : ordered) {
            cf.p1 += s->positions[0];
            cf.p2 += s->positions[1];
        }
        cf.p1 /= static_cast<double>(ordered.size());
        cf.p2 /= static_cast<double>(ordered.size());
        cf.n_train = n_train;
        cf.n_test = members.size() - n_train;
        std::size_t hits_train = 0;
        std::vector<bool> test_outcomes;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (i < n_train) {
                hits_train += members[i]->correct ? 1 : 0;
            } else {
                test_outcomes.push_back(members[i]->correct);
            }
        }
        const auto hits_test = static_cast<std::size_t>(std::count(test_outcomes.begin(), test_outcomes.end(), true));
        cf.accuracy_train = 100.0 * static_cast<double>(hits_train) / static_cast<double>(cf.n_train);
        cf.accuracy_test = 100.0 * static_cast<double>(hits_test) / static_cast<double>(cf.n_test);
        cf.test_stddev = bootstrap_stddev(test_outcomes, options.bootstrap_resamples,
                                          mix_seed(options.bootstrap_seed, hash_label(cf.cell)));
        variance_sum += cf.test_stddev * cf.test_stddev;

        SurfaceCell sc{cf.grid, cf.p1, cf.p2, cf.accuracy_train, std::abs(cf.grid[1] - cf.grid[0]),
                       std::abs(cf.p2 - cf.p1)};
        train.push_back(sc);
        sc.accuracy = cf.accuracy_test;
        test.push_back(sc);
        result.cells.push_back(std::move(cf));
    }
    result.noise_floor = std::sqrt(variance_sum / static_cast<double>(result.cells.size()));

    result.gamma_hat = estimate_gamma(train, result.G_hat);
    result.H_hat = estimate_H(train, result.gamma_hat, result.G_hat, options.floor, options.min_class_cells);

    std::vector<double> pred3, pred2, obs_train, obs_test;
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        auto& cf = result.cells[i];
        const double base = 100.0 * result.gamma_hat * product(result.G_hat, train[i]);
        cf.predicted_middle_only = clamp_pct(base);
        cf.predicted_distance = clamp_pct(base * result.H_hat.at(train[i].distance_class));
        pred3.push_back(cf.predicted_middle_only);
        pred2.push_back(cf.predicted_distance);
        obs_train.push_back(cf.accuracy_train);
        obs_test.push_back(cf.accuracy_test);
    }
    result.rmse_train_middle_only = rmse(pred3, obs_train);
    result.rmse_test_middle_only = rmse(pred3, obs_test);
    result.rmse_train_distance = rmse(pred2, obs_train);
    result.rmse_test_distance = rmse(pred2, obs_test);
    return result;
}

void to_json(nlohmann::json& j, const FitResult& f) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : f.H_hat.classes) {
        classes.push_back({{"members", c.members},
                           {"distance", c.distance},
                           {"cells", c.cells},
                           {"H", c.H},
                           {"standard_error", c.standard_error ? nlohmann::json(*c.standard_error) : nlohmann::json()}});
    }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : f.cells) {
        cells.push_back({{"cell", c.cell},
                         {"grid", c.grid},
                         {"p1", c.p1},
                         {"p2", c.p2},
                         {"n_train", c.n_train},
                         {"n_test", c.n_test},
                         {"accuracy_train", c.accuracy_train},
                         {"accuracy_test", c.accuracy_test},
                         {"test_stddev", c.test_stddev},
                         {"predicted_middle_only", c.predicted_middle_only},
                         {"predicted_distance", c.predicted_distance}});
    }
    j = {{"format_version", kFitFormatVersion},
         {"encoding", to_string(f.encoding)},
         {"gamma_hat", f.gamma_hat},
         {"G_hat", f.G_hat},
         {"H_hat", {{"classes", classes}, {"excluded_cells", f.H_hat.excluded}}},
         {"rmse",
          {{"middle_only", {{"train", f.rmse_train_middle_only}, {"test", f.rmse_test_middle_only}}},
           {"distance", {{"train", f.rmse_train_distance}, {"test", f.rmse_test_distance}}}}},
         {"noise_floor", f.noise_floor},
         {"split_seed", f.split_seed},
         {"cells", cells}};
}

void from_json(const nlohmann::json& j, FitResult& f) {
    f = FitResult{};
    if (j.value("format_version", 0) != kFitFormatVersion) throw IoError("unsupported fit result version");
    f.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    f.gamma_hat = j.at("gamma_hat").get<double>();
    f.G_hat = j.at("G_hat").get<PiecewiseLinear>();
    for (const auto& c : j.at("H_hat").at("classes")) {
        DistanceClass dc;
        dc.members = c.at("members").get<std::vector<int>>();
        dc.distance = c.at("distance").get<double>();
        dc.cells = c.at("cells").get<std::size_t>();
        dc.H = c.at("H").get<double>();
        if (!c.at("standard_error").is_null()) dc.standard_error = c["standard_error"].get<double>();
        f.H_hat.classes.push_back(std::move(dc));
    }
    f.H_hat.excluded = j.at("H_hat").at("excluded_cells").get<std::size_t>();
    const auto& r = j.at("rmse");
    f.rmse_train_middle_only = r.at("middle_only").at("train").get<double>();
    f.rmse_test_middle_only = r.at("middle_only").at("test").get<double>();
    f.rmse_train_distance = r.at("distance").at("train").get<double>();
    f.rmse_test_distance = r.at("distance").at("test").get<double>();
    f.noise_floor = j.at("noise_floor").get<double>();
    f.split_seed = j.at("split_seed").get<std::uint64_t>();
    for (const auto& c : j.at("cells")) {
        CellFit cf;
        cf.cell = c.at("cell").get<std::string>();
        cf.grid = c.at("grid").get<GridCell>();
        cf.p1 = c.at("p1").get<double>();
        cf.p2 = c.at("p2").get<double>();
        cf.n_train = c.at("n_train").get<std::size_t>();
        cf.n_test = c.at("n_test").get<std::size_t>();
        cf.accuracy_train = c.at("accuracy_train").get<double>();
        cf.accuracy_test = c.at("accuracy_test").get<double>();
        cf.test_stddev = c.at("test_stddev").get<double>();
        cf.predicted_middle_only = c.at("predicted_middle_only").get<double>();
        cf.predicted_distance = c.at("predicted_distance").get<double>();
        f.cells.push_back(std::move(cf));
    }
}

}  // namespace lidbench
