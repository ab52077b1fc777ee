#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orbitgraph/egcn.hpp"
#include "orbitgraph/physics_loss.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/tape.hpp"

namespace orbitgraph {

struct TrainConfig {
    std::size_t epochs = 150;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double ar_ratio_max = 0.5;
    double ar_weight = 0.5;
    double grad_clip = 5.0;
    std::uint64_t seed = 3;         // trajectory order and AR selection
    std::uint64_t model_seed = 2;   // parameter initialization
    std::size_t checkpoint_every = 0;  // 0: best checkpoint only
    // Rebuild AR adjacency from predicted positions instead of ground truth.
    bool ar_rebuild_graph = false;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One history window and the ground truth it is scored against.
struct WindowPair {
    std::size_t start = 0;
    std::vector<GraphSnapshot> history;
    Matrix target;  // [agents x horizon*6], PredictionBatch layout
};

// Stride-1 windows starting at 0 .. T - (history + horizon). Empty (with a
// warning) when the trajectory is too short.
std::vector<WindowPair> sliding_windows(const ScenarioTrajectory& traj, std::size_t history = 8,
                                        std::size_t horizon = 6);

// [agents x horizon*6] ground truth for steps first .. first + horizon - 1.
Matrix target_matrix(const ScenarioTrajectory& traj, std::size_t first, std::size_t horizon);

double ar_ratio(std::size_t epoch, std::size_t total_epochs, double ar_ratio_max);

// floor(ar_ratio * count) ids by seeded shuffle; sorted; deterministic per (seed, epoch).
std::vector<std::size_t> select_autoregressive(std::span<const std::size_t> ids, std::size_t epoch,
                                               std::size_t total_epochs, double ar_ratio_max,
                                               std::uint64_t seed);

struct RolloutOptions {
    bool autoregressive = false;
    bool compute_gradients = true;
    bool keep_predictions = false;
    bool rebuild_graph = false;
    double lambda_phys = 0.0;
    LossConfig loss;
};

struct WindowOutput {
    std::size_t start = 0;        // first history step
    std::size_t target_step = 0;  // step of the first predicted state
    PredictionBatch prediction;
    Matrix target;
    Matrix last_observed;  // [agents x 6]
};

struct RolloutResult {
    double loss = 0.0;          // mean per-window total loss
    double data_loss = 0.0;     // mean per-window data term
    double physics_loss = 0.0;  // mean per-window physics term
    std::size_t windows = 0;
    Gradients gradients;
    std::vector<WindowOutput> outputs;
};

/**
 * Runs every stride-1 window of a trajectory with one weight-evolution state.
 *
 * Window s starts from the weights left after step s - 1 of the previous
 * window, so a single pass over the trajectory evaluates every window
 * exactly as model_forward would. With `autoregressive`, each window's
 * first predicted state replaces the history entry later windows see
 * (features rebuilt from it, adjacency from ground truth unless
 * `rebuild_graph`). Throws TrainingError on a non-finite window loss.
 */
RolloutResult rollout_trajectory(const ScenarioTrajectory& traj, const Model& model,
                                 const RolloutOptions& options);

double global_norm(const Gradients& grads);
// Rescales so the global L2 norm is <= max_norm; returns the pre-clip norm.
double clip_gradients(Gradients& grads, double max_norm);

class AdamOptimizer {
public:
    AdamOptimizer(const TrainConfig& cfg, const EvolveGcnParams& params);
    void step(EvolveGcnParams& params, const Gradients& grads);
    std::size_t steps() const { return steps_; }

private:
    double lr_, beta1_, beta2_, epsilon_;
    std::size_t steps_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_loss = 0.0;   // weighted mean over trajectories
    double val_loss = 0.0;
    double lambda_phys = 0.0;
    double ar_ratio = 0.0;
    double seconds = 0.0;
};

struct EpochContext {
    std::size_t epoch = 0;
    std::size_t total_epochs = 1;
    TrainConfig train;
    LossConfig loss;
};

double epoch_lambda_phys(const LossConfig& loss, std::size_t epoch, std::size_t total_epochs);

// Sum w_i * loss_i / sum w_i.
double weighted_epoch_loss(std::span<const double> losses, std::span<const double> weights);

// Mean non-AR rollout loss; trajectories evaluated concurrently.
double validation_loss(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                       const LossConfig& loss, double lambda_phys);
double validation_loss_serial(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                              const LossConfig& loss, double lambda_phys);

EpochReport train_epoch(const DatasetSplit& data, Model& model, AdamOptimizer& optimizer,
                        const EpochContext& ctx);

struct FitOptions {
    std::string output_dir;  // empty: no checkpoints or log
    std::string label;
};

struct FitResult {
    Model best;
    Model last;
    std::size_t best_epoch = 0;
    std::vector<EpochReport> reports;
};

FitResult fit(const DatasetSplit& data, const TrainConfig& train, const ModelConfig& model_cfg,
              const LossConfig& loss, const FitOptions& options = {});

} // namespace orbitgraph
