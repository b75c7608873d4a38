#include "lidbench/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lidbench/error.hpp"

using namespace lidbench;

namespace {

const PiecewiseLinear kG({{0.1, 90.0}, {0.5, 50.0}, {0.9, 80.0}});

double planted_h(int d) { return 1.0 / (1.0 + d); }

// Noise-free surface: accuracy = 100 * gamma * G(p1) G(p2) H(class).
std::vector<SurfaceCell> surface(double gamma) {
    std::vector<SurfaceCell> cells;
    for (int p1 = 0; p1 < 3; ++p1) {
        for (int p2 = 3; p2 < 6; ++p2) {
            SurfaceCell c;
            c.grid = {p1, p2};
            c.p1 = 0.05 + 0.15 * p1;
            c.p2 = 0.55 + 0.15 * (p2 - 3);
            c.distance_class = p2 - p1;
            c.distance = c.p2 - c.p1;
            c.accuracy = 100.0 * gamma * kG(c.p1) / 100.0 * kG(c.p2) / 100.0 * planted_h(c.distance_class);
            cells.push_back(c);
        }
    }
    return cells;
}

ScoredInstance scored(TaskKind task, std::string id, std::string cell, int rank, std::vector<double> positions,
                      bool correct) {
    ScoredInstance s;
    s.id = std::move(id);
    s.task = task;
    s.encoding = Encoding::adjacency;
    s.cell = std::move(cell);
    s.rank = rank;
    s.positions = std::move(positions);
    s.correct = correct;
    return s;
}

struct Synthetic {
    std::vector<ScoredInstance> edge;
    std::vector<ScoredInstance> common;
};

Synthetic synthetic(std::size_t per_cell) {
    Synthetic out;
    const char* names[] = {"beginning", "middle", "end"};
    const double pos[] = {0.1, 0.5, 0.9};
    const int acc[] = {90, 50, 80};
    for (int r = 0; r < 3; ++r) {
        for (int i = 0; i < 100; ++i) {
            out.edge.push_back(scored(TaskKind::edge_existence, "e" + std::to_string(r) + "-" + std::to_string(100 + i),
                                      names[r], r, {pos[r]}, i < acc[r]));
        }
    }
    Rng rng(17);
    for (const auto& c : surface(0.9)) {
        const std::string key = std::to_string(c.grid[0]) + "," + std::to_string(c.grid[1]);
        for (std::size_t i = 0; i < per_cell; ++i) {
            auto s = scored(TaskKind::common_connection, "c" + key + "-" + std::to_string(1000 + i), key,
                            c.grid[0] * 3 + c.grid[1] - 3, {c.p1, c.p2}, rng.uniform() * 100.0 < c.accuracy);
            s.grid = c.grid;
            out.common.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace

TEST(EstimateG, InterpolatesMeasuredPoints) {
    const auto G = estimate_G({{0.9, 80.0}, {0.1, 90.0}, {0.5, 50.0}});
    EXPECT_DOUBLE_EQ(G(0.1), 90.0);
    EXPECT_DOUBLE_EQ(G(0.3), 70.0);
    EXPECT_DOUBLE_EQ(G(0.0), 90.0);
    EXPECT_DOUBLE_EQ(G(1.0), 80.0);
    EXPECT_THROW(estimate_G({{0.5, 10.0}}), FitError);
    EXPECT_THROW(estimate_G({{0.5, 10.0}, {0.5, 20.0}}), FitError);
}

TEST(EstimateGamma, RecoversPlantedValueWithoutDistanceEffect) {
    auto cells = surface(0.7);
    for (auto& c : cells) c.accuracy /= planted_h(c.distance_class);
    EXPECT_NEAR(estimate_gamma(cells, kG), 0.7, 1e-12);
    std::vector<SurfaceCell> zero(1);
    zero[0].p1 = 0.1;
    EXPECT_THROW(estimate_gamma(zero, PiecewiseLinear::constant(0.0)), FitError);
    EXPECT_THROW(estimate_gamma({}, kG), FitError);
}

TEST(EstimateH, RecoversPlantedCurve) {
    const auto cells = surface(0.8);
    const auto H = estimate_H(cells, 0.8, kG);
    ASSERT_EQ(H.classes.size(), 5u);
    for (const auto& c : H.classes) {
        ASSERT_EQ(c.members.size(), 1u);
        EXPECT_NEAR(c.H, planted_h(c.members[0]), 1e-12);
    }
    EXPECT_EQ(H.classes[0].cells, 1u);
    EXPECT_FALSE(H.classes[0].standard_error.has_value());
    EXPECT_NEAR(*H.classes[2].standard_error, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(H.at(42), 1.0);
    EXPECT_THROW(estimate_H(cells, 0.0, kG), FitError);
}

TEST(EstimateH, MergesSparseClassesAndSkipsFloor) {
    const auto cells = surface(0.8);
    const auto merged = estimate_H(cells, 0.8, kG, 1e-6, 2);
    ASSERT_EQ(merged.classes.size(), 3u);
    EXPECT_EQ(merged.classes.front().members, (std::vector<int>{1, 2}));
    EXPECT_EQ(merged.classes.back().members, (std::vector<int>{4, 5}));
    EXPECT_EQ(merged.at(1), merged.at(2));

    const auto floored = estimate_H(cells, 0.8, kG, 0.5);
    EXPECT_GT(floored.excluded, 0u);
    std::size_t used = 0;
    for (const auto& c : floored.classes) used += c.cells;
    EXPECT_EQ(used + floored.excluded, cells.size());
}

TEST(CompareModels, SplitsEveryCellInHalf) {
    const auto data = synthetic(40);
    FitOptions opts;
    opts.split_seed = 4;
    opts.bootstrap_resamples = 200;
    const auto fit = compare_models(data.edge, data.common, opts);
    EXPECT_EQ(fit.encoding, Encoding::adjacency);
    ASSERT_EQ(fit.cells.size(), 9u);
    for (const auto& c : fit.cells) {
        EXPECT_EQ(c.n_train, 20u);
        EXPECT_EQ(c.n_test, 20u);
        EXPECT_GE(c.predicted_distance, 0.0);
        EXPECT_LE(c.predicted_distance, 100.0);
    }
    EXPECT_DOUBLE_EQ(fit.G_hat(0.5), 50.0);
    EXPECT_GT(fit.noise_floor, 0.0);
    EXPECT_GT(fit.gamma_hat, 0.0);
    // H is fitted on the training half, so it can only help there.
    EXPECT_LE(fit.rmse_train_distance, fit.rmse_train_middle_only + 1e-9);
}

TEST(CompareModels, DeterministicInSeedAndInputOrder) {
    auto data = synthetic(30);
    FitOptions opts;
    opts.split_seed = 9;
    opts.bootstrap_resamples = 100;
    const nlohmann::json a = compare_models(data.edge, data.common, opts);
    std::reverse(data.common.begin(), data.common.end());
    std::reverse(data.edge.begin(), data.edge.end());
    const nlohmann::json b = compare_models(data.edge, data.common, opts);
    EXPECT_EQ(a, b);
    opts.split_seed = 10;
    EXPECT_NE(nlohmann::json(compare_models(data.edge, data.common, opts))["cells"], a["cells"]);
}

TEST(CompareModels, JsonRoundTrip) {
    const auto data = synthetic(20);
    FitOptions opts;
    opts.bootstrap_resamples = 50;
    const nlohmann::json j = compare_models(data.edge, data.common, opts);
    EXPECT_EQ(nlohmann::json(j.get<FitResult>()), j);
}

TEST(CompareModels, RejectsUnusableInput) {
    const auto data = synthetic(20);
    EXPECT_THROW(compare_models(data.edge, {}), FitError);
    EXPECT_THROW(compare_models(data.common, data.common), FitError);
    std::vector<ScoredInstance> one_cell(data.common.begin(), data.common.begin() + 20);
    EXPECT_THROW(compare_models(data.edge, one_cell), FitError);
    std::vector<ScoredInstance> lonely(data.common.begin(), data.common.begin() + 1);
    lonely.push_back(data.common.back());
    EXPECT_THROW(compare_models(data.edge, lonely), FitError);
}
