#pragma once

#include <span>
#include <string>
#include <vector>

#include "orbitgraph/egcn.hpp"
#include "orbitgraph/matrix.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/training.hpp"

namespace orbitgraph {

// x is radial, y in-track, z cross-track.
enum class Axis { Radial = 0, InTrack = 1, CrossTrack = 2 };

const char* axis_name(Axis axis);
Axis axis_from_name(const std::string& name);

struct AxisRmse {
    std::size_t satellite = 0;  // 1-based agent index
    Axis axis = Axis::Radial;
    double rmse = 0.0;          // km

    friend bool operator==(const AxisRmse&, const AxisRmse&) = default;
};

/// Position RMSE per horizon step, pooled over agents, axes and windows.
struct HorizonCurve {
    std::vector<double> rmse;  // km, one entry per step

    // Mean increase over the final two steps.
    double tail_slope() const;
    friend bool operator==(const HorizonCurve&, const HorizonCurve&) = default;
};

/**
 * Per (satellite, axis) position RMSE over every window and horizon step.
 * Each prediction/truth pair is [agents x horizon*6]; agent i of every pair
 * counts as satellite i + 1, so trajectories may have different agent
 * counts. Throws ContractError on empty input, DimensionError on mismatch.
 */
std::vector<AxisRmse> rmse_per_axis(std::span<const Matrix> predictions,
                                    std::span<const Matrix> truths, std::size_t horizon);

HorizonCurve horizon_curve(std::span<const Matrix> predictions, std::span<const Matrix> truths,
                           std::size_t horizon);

struct RunMetrics {
    std::string label;
    std::vector<AxisRmse> rows;

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

// satellite,axis,rmse_km,run_label with round-trip precision.
std::string metrics_csv(const RunMetrics& metrics);
RunMetrics parse_metrics_csv(const std::string& text);
// step,rmse_km
std::string curve_csv(const HorizonCurve& curve);
HorizonCurve parse_curve_csv(const std::string& text);

struct ComparisonTable {
    std::string text;  // aligned, 4 decimals
    std::string csv;   // satellite,axis,<label a>,<label b>
};

// Throws ContractError unless both runs cover the same (satellite, axis) rows.
ComparisonTable comparison_table(const RunMetrics& a, const RunMetrics& b);

struct EvaluationOptions {
    bool autoregressive = false;
};

struct TrajectoryPredictions {
    std::size_t trajectory = 0;  // ScenarioTrajectory::index
    std::vector<WindowOutput> windows;
};

struct EvaluationResult {
    std::vector<TrajectoryPredictions> trajectories;
    std::vector<AxisRmse> axis_rmse;
    HorizonCurve curve;
};

// Rolls the model over every trajectory (concurrently) and scores positions.
EvaluationResult evaluate(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                          const EvaluationOptions& options = {});
EvaluationResult evaluate_serial(std::span<const ScenarioTrajectory> trajectories,
                                 const Model& model, const EvaluationOptions& options = {});

/**
 * Writes, for one trajectory, sat<k>_comparison.svg/.csv (truth against the
 * last-horizon-step prediction for the three position axes) and
 * horizon_error.svg/.csv. Returns the paths written. Output bytes depend
 * only on the inputs.
 */
std::vector<std::string> emit_plots(const ScenarioTrajectory& trajectory,
                                    std::span<const WindowOutput> windows,
                                    const std::string& out_dir);

// Writes text to path, creating parent directories; throws on I/O failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

} // namespace orbitgraph
