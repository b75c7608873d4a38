#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/evaluator.hpp"
#include "lidbench/stats.hpp"

namespace lidbench {

inline constexpr int kFitFormatVersion = 1;

/// Piecewise-linear interpolant over (normalized position, accuracy %) points,
/// clamped outside the measured range. Throws FitError on fewer than two
/// points or repeated positions.
PiecewiseLinear estimate_G(std::vector<std::pair<double, double>> points);

/// One common-connection cell: block positions and observed accuracy (%).
struct SurfaceCell {
    GridCell grid{};
    double p1 = 0.0;
    double p2 = 0.0;
    double accuracy = 0.0;
    /// Distance class key, |p2 - p1| on the grid.
    int distance_class = 0;
    /// Normalized |p2 - p1|.
    double distance = 0.0;
};

/// Least squares through the origin of F onto G(p1) G(p2), in fractions:
/// sum(F g) / sum(g^2). Throws FitError when every product is zero.
double estimate_gamma(std::span<const SurfaceCell> cells, const PiecewiseLinear& G_hat);

struct DistanceClass {
    /// Grid distances merged into this class, ascending.
    std::vector<int> members;
    /// Mean normalized distance of the class's cells.
    double distance = 0.0;
    std::size_t cells = 0;
    double H = 1.0;
    /// Standard error of the mean ratio; absent for single-cell classes.
    std::optional<double> standard_error;
};

struct HEstimate {
    std::vector<DistanceClass> classes;
    /// Cells skipped because gamma G G fell below the floor.
    std::size_t excluded = 0;

    /// H of the class holding grid distance `d`; 1 when no class covers it.
    double at(int d) const;
};

/// Mean of F / (gamma G(p1) G(p2)) per distance class. Classes with fewer
/// than `min_class_cells` usable cells merge into a neighbor.
HEstimate estimate_H(std::span<const SurfaceCell> cells, double gamma_hat, const PiecewiseLinear& G_hat,
                     double floor = 1e-6, std::size_t min_class_cells = 1);

struct FitOptions {
    std::uint64_t split_seed = 0;
    std::size_t min_class_cells = 1;
    double floor = 1e-6;
    std::size_t bootstrap_resamples = 1000;
    std::uint64_t bootstrap_seed = 0;
};

struct CellFit {
    std::string cell;
    GridCell grid{};
    double p1 = 0.0;
    double p2 = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy_train = 0.0;
    double accuracy_test = 0.0;
    double test_stddev = 0.0;
    double predicted_middle_only = 0.0;  // gamma G G
    double predicted_distance = 0.0;     // gamma G G H
};

struct FitResult {
    Encoding encoding = Encoding::incident;
    double gamma_hat = 0.0;
    PiecewiseLinear G_hat;  // accuracy %, by normalized position
    HEstimate H_hat;
    double rmse_train_middle_only = 0.0;
    double rmse_test_middle_only = 0.0;
    double rmse_train_distance = 0.0;
    double rmse_test_distance = 0.0;
    /// RMSE a perfect model would show from sampling noise alone: root mean
    /// bootstrap variance of the test-half cell accuracies.
    double noise_floor = 0.0;
    std::uint64_t split_seed = 0;
    std::vector<CellFit> cells;
};

void to_json(nlohmann::json& j, const FitResult& f);
void from_json(const nlohmann::json& j, FitResult& f);

/// Estimates G from the edge-existence instances (all samples), splits every
/// common-connection cell's samples 50/50, fits gamma and H on the training
/// half and reports RMSE of both models on both halves. Predictions are
/// clamped to [0, 100]. Throws FitError on fewer than two cells or an
/// unusable G.
FitResult compare_models(std::span<const ScoredInstance> edge_existence,
                         std::span<const ScoredInstance> common_connection, const FitOptions& options = {});

}  // namespace lidbench
