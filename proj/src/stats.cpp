#include "lidbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lidbench/error.hpp"
#include "lidbench/rng.hpp"

namespace lidbench {

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw ParameterError("piecewise-linear function needs at least two knots");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i].first > knots_[i - 1].first)) {
            throw ParameterError("piecewise-linear knots must have strictly increasing x");
        }
    }
    for (const auto& [x, y] : knots_) {
        if (!std::isfinite(x) || !std::isfinite(y)) throw ParameterError("non-finite knot");
    }
}

double PiecewiseLinear::operator()(double x) const {
    if (knots_.empty()) throw ParameterError("empty piecewise-linear function");
    if (x <= knots_.front().first) return knots_.front().second;
    if (x >= knots_.back().first) return knots_.back().second;
    auto hi = std::upper_bound(knots_.begin(), knots_.end(), x,
                               [](double v, const auto& k) { return v < k.first; });
    auto lo = hi - 1;
    if (x == lo->first) return lo->second;
    const double t = (x - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

void to_json(nlohmann::json& j, const PiecewiseLinear& f) {
    j = nlohmann::json::array();
    for (const auto& [x, y] : f.knots()) j.push_back({x, y});
}

void from_json(const nlohmann::json& j, PiecewiseLinear& f) {
    if (j.is_number()) {
        f = PiecewiseLinear::constant(j.get<double>());
        return;
    }
    if (!j.is_array()) throw ParameterError("function table must be an array of [x, y] pairs or a number");
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : j) {
        if (!k.is_array() || k.size() != 2) throw ParameterError("function knot must be [x, y]");
        knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    f = PiecewiseLinear(std::move(knots));
}

double mean(std::span<const double> values) {
    if (values.empty()) throw ParameterError("mean of an empty set");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double rmse(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size() || predicted.empty()) {
        throw ParameterError("rmse needs two non-empty series of equal length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - observed[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

double bootstrap_stddev(std::vector<bool> outcomes, std::size_t resamples, std::uint64_t seed) {
    if (outcomes.empty() || resamples < 2) return 0.0;
    std::sort(outcomes.begin(), outcomes.end());
    const std::size_t n = outcomes.size();
    Rng rng(seed);
    std::vector<double> acc(resamples);
    for (auto& a : acc) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) hits += outcomes[rng.below(n)] ? 1 : 0;
        a = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
    }
    const double m = mean(acc);
    double ss = 0.0;
    for (double a : acc) ss += (a - m) * (a - m);
    return std::sqrt(ss / static_cast<double>(resamples - 1));
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ParameterError("spearman needs two paired series of length >= 2");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double ma = mean(ra);
    const double mb = mean(rb);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace lidbench
