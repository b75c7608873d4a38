#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidbench/evaluator.hpp"
#include "lidbench/fit.hpp"

namespace lidbench {

inline constexpr int kReportFormatVersion = 1;

std::string cells_csv(std::span<const AccuracyCell> cells);
std::string cells_jsonl(std::span<const AccuracyCell> cells);
std::string degeneration_csv(std::span<const DegenerationSummary> rows);

/// 3x3 grid of "accuracy ± stddev" for one task and encoding (common
/// connection or similarity cells).
std::string heatmap_svg(std::span<const AccuracyCell> cells);

/// Accuracy by placement, one series per encoding (edge existence cells).
std::string placement_chart_svg(std::span<const AccuracyCell> cells);

/// Fitted G (accuracy by position) and H (multiplier by distance) side by side.
std::string fit_curves_svg(const FitResult& fit);

/// Writes cells.csv, cells.jsonl, degeneration.csv, one heatmap per grid
/// task/encoding, the placement chart when edge-existence cells exist, fit
/// curves per fit, summary.json and manifest.json (sha256 of every other
/// file). Returns the written file names. Throws ParameterError on empty
/// cells, IoError on write failure.
std::vector<std::string> emit_report(std::span<const AccuracyCell> cells,
                                     std::span<const DegenerationSummary> degeneration,
                                     std::span<const FitResult> fits, const nlohmann::json& metadata,
                                     const std::filesystem::path& dir);

}  // namespace lidbench
