#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace lidbench {

/// Piecewise-linear function through (x, y) knots with strictly increasing x.
/// Queries outside the knot range clamp to the nearest endpoint value.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    /// Throws ParameterError on fewer than two knots or non-increasing x.
    explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);

    static PiecewiseLinear constant(double value) { return PiecewiseLinear({{0.0, value}, {1.0, value}}); }

    double operator()(double x) const;
    const std::vector<std::pair<double, double>>& knots() const { return knots_; }
    bool empty() const { return knots_.empty(); }

    bool operator==(const PiecewiseLinear&) const = default;

private:
    std::vector<std::pair<double, double>> knots_;
};

/// [[x, y], ...]; a bare number is accepted as a constant function.
void to_json(nlohmann::json& j, const PiecewiseLinear& f);
void from_json(const nlohmann::json& j, PiecewiseLinear& f);

double mean(std::span<const double> values);

/// Root mean squared difference; the spans must have equal, non-zero length.
double rmse(std::span<const double> predicted, std::span<const double> observed);

/// Standard deviation (denominator resamples - 1) of the success percentage
/// over `resamples` bootstrap resamples of the outcomes. Outcomes are sorted
/// first, so the result does not depend on their order.
double bootstrap_stddev(std::vector<bool> outcomes, std::size_t resamples, std::uint64_t seed);

/// Ranks 1..n with ties given their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation (Pearson on average ranks). Returns 0 when
/// either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace lidbench
