#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orbitgraph/cw.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/matrix.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/tape.hpp"

namespace orbitgraph {

struct ModelConfig {
    // Feature width followed by the output width of each GCN layer.
    std::vector<std::size_t> layer_dims{kFeatureWidth, 32, 32};
    std::size_t history = 8;
    std::size_t horizon = 6;
    std::size_t state_dim_out = kStateDim;

    void validate() const;
    std::size_t layer_count() const { return layer_dims.size() - 1; }
    std::size_t output_width() const { return horizon * state_dim_out; }
    // Top-layer embedding concatenated with the last snapshot's input features.
    std::size_t readout_input_width() const { return layer_dims.back() + layer_dims.front(); }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Gate parameters of the weight-evolving GRU; every matrix has W's shape.
struct MatrixGru {
    Matrix wz, uz, bz;
    Matrix wr, ur, br;
    Matrix wh, uh, bh;

    friend bool operator==(const MatrixGru&, const MatrixGru&) = default;
};

struct EvolveGcnParams {
    std::vector<Matrix> initial_weights;  // W_0 per layer
    std::vector<MatrixGru> grus;          // one per layer
    Matrix readout_weight;                // [readout_input_width x output_width]
    Matrix readout_bias;                  // [1 x output_width]

    // Stable enumeration; the position in this list is the ParamId.
    std::vector<std::string> names() const;
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    std::size_t scalar_count() const;

    friend bool operator==(const EvolveGcnParams&, const EvolveGcnParams&) = default;
};

/**
 * Per-column affine maps fitted on the training split. Model inputs are
 * standardized; readout outputs are mapped back to km and km/s.
 */
struct Standardizer {
    Matrix feature_mean;   // [1 x kFeatureWidth]
    Matrix feature_scale;
    Matrix state_mean;     // [1 x kStateDim]
    Matrix state_scale;

    static Standardizer identity();
    static Standardizer fit(std::span<const ScenarioTrajectory> trajectories);

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct Model {
    ModelConfig config;
    EvolveGcnParams params;
    Standardizer standardizer;

    friend bool operator==(const Model&, const Model&) = default;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
EvolveGcnParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Forecast for every agent: [agents x horizon*6], step-major
/// (columns k*6 .. k*6+5 hold step k's x, y, z, vx, vy, vz).
struct PredictionBatch {
    std::size_t horizon = 0;
    Matrix values;

    std::size_t agents() const { return values.rows(); }
    RelativeState state(std::size_t step, std::size_t agent) const;
    Vec3 position(std::size_t step, std::size_t agent) const;
    Vec3 velocity(std::size_t step, std::size_t agent) const;
};

// Value-level building blocks (no tape).

// Mean node-feature row of h tiled to [d_in x out_cols].
Matrix summarize(const Matrix& h, std::size_t out_cols);
Matrix gru_evolve(const Matrix& w_prev, const Matrix& z, const MatrixGru& gru);
// tanh(A H W) when hidden, A H W otherwise.
Matrix gcn_forward(const Matrix& a_hat, const Matrix& h, const Matrix& w, bool hidden);

using LayerWeights = std::vector<Matrix>;

struct ForwardResult {
    PredictionBatch prediction;
    // Per-layer weights after the window's first step: the state the next
    // stride-1 window of the same trajectory starts from.
    LayerWeights carry;
    // Per-layer weights after the window's last step.
    LayerWeights final_weights;
};

/**
 * Runs one history window: for each snapshot, every layer evolves its weight
 * from the summary of that layer's input and then convolves. The last
 * step's top-layer embedding feeds the readout. `start` == nullptr starts
 * from W_0.
 */
ForwardResult model_forward(std::span<const GraphSnapshot> window, const Model& model,
                            const LayerWeights* start = nullptr);

/**
 * The model expressed on a Tape. Parameters are registered once at
 * construction, as tracked leaves (ParamId = EvolveGcnParams::tensors()
 * order) or as constants.
 */
class EvolveGcnGraph {
public:
    EvolveGcnGraph(Tape& tape, const Model& model, bool track_parameters);
    // Uses caller-registered nodes (one per EvolveGcnParams::tensors() entry)
    // instead of the model's parameter values.
    EvolveGcnGraph(Tape& tape, const Model& model, std::span<const Var> parameters);

    struct GruVars {
        Var wz, uz, bz, wr, ur, br, wh, uh, bh;
    };
    using WeightVars = std::vector<Var>;

    WeightVars initial_weights() const { return initial_; }
    const std::vector<Var>& parameters() const { return all_; }
    Tape& tape() const { return tape_; }
    const Model& model() const { return model_; }

    Var standardize_features(Var raw_features);
    Var summarize(Var h, std::size_t out_cols);
    Var gru_evolve(Var w_prev, Var z, const GruVars& gru);
    Var gcn(Var a_hat, Var h, Var w, bool hidden);

    // Evolves every layer's weight in `weights` and returns the top-layer
    // embedding for this snapshot.
    Var step(Var normalized_adjacency, Var standardized_features, WeightVars& weights);

    // [N x output_width] in physical units.
    Var readout(Var top_embedding, Var standardized_features);

private:
    void bind_parameters();
    Var tiled_constant(const Matrix& row, std::size_t rows);

    Tape& tape_;
    const Model& model_;
    WeightVars initial_;
    std::vector<GruVars> grus_;
    Var readout_weight_;
    Var readout_bias_;
    std::vector<Var> all_;
    Var feature_mean_, feature_inv_scale_, out_scale_, out_mean_;
    std::size_t cached_rows_ = 0;
};

} // namespace orbitgraph
