#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orbitgraph/checkpoint.hpp"
#include "orbitgraph/evaluation.hpp"
#include "orbitgraph/run_config.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/training.hpp"

namespace orbitgraph {

struct GenerateSummary {
    std::size_t trajectories = 0;
    std::size_t train = 0, validation = 0, test = 0;
    std::map<std::size_t, std::size_t> agent_histogram;  // agents -> trajectories
    double mean_initial_density = 0.0;                  // step-0 edge density

    std::string to_string() const;
};

DatasetFile generate_dataset(const RunConfig& cfg);
GenerateSummary summarize_dataset(const DatasetFile& dataset);

struct TrainArtifacts {
    FitResult fit;
    std::string checkpoint_path;
    std::string log_path;
};

// Runs fit and writes train_log.csv, checkpoint_best.json and config.json to out_dir.
TrainArtifacts train_run(const RunConfig& cfg, const DatasetFile& dataset,
                         const std::string& out_dir, const std::string& label);

// Throws ConfigError naming the field when the checkpoint cannot score the dataset.
void check_compatible(const ModelConfig& model, const DatasetFile& dataset);

struct EvaluateArtifacts {
    RunMetrics metrics;
    HorizonCurve curve;
};

// Scores the test split; writes metrics.csv and curve.csv.
EvaluateArtifacts evaluate_run(const Checkpoint& ckpt, const DatasetFile& dataset,
                               const std::string& out_dir, bool autoregressive = false);

// Looks a trajectory up by its generation index across all splits.
const ScenarioTrajectory& find_trajectory(const DatasetFile& dataset, std::size_t index);

// Prediction CSVs and SVGs for one trajectory.
std::vector<std::string> predict_run(const Checkpoint& ckpt, const DatasetFile& dataset,
                                     std::size_t trajectory_index, const std::string& out_dir);

// Merges two evaluated run directories into comparison.txt / comparison.csv
// and a horizon-curve overlay.
ComparisonTable plot_runs(const std::string& run_a, const std::string& run_b,
                          const std::string& out_dir);

struct DeskOptions {
    std::uint64_t data_seed = 1;
    std::optional<std::uint64_t> train_seed;  // sets train.seed and train.model_seed
    std::optional<std::size_t> epochs;
    std::string out_dir = "desk";
};

struct DeskArm {
    std::string label;
    double first_val_loss = 0.0;
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;
    EvaluateArtifacts evaluation;
};

struct DeskReport {
    DeskArm physics;
    DeskArm no_physics;
    ComparisonTable table;

    std::string summary_json() const;
};

// The 20-trajectory, 3-agent configuration used by reproduce-desk.
RunConfig desk_config(const DeskOptions& options);

/**
 * Generate, train both loss arms, evaluate, compare and plot. Layout under
 * out_dir: dataset.json, physics/, no-physics/, comparison.{txt,csv},
 * summary.json.
 */
DeskReport reproduce_desk(const RunConfig& cfg, const std::string& out_dir);

} // namespace orbitgraph
