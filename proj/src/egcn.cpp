#include "orbitgraph/egcn.hpp"

#include <cmath>
#include <random>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/kernels.hpp"

namespace orbitgraph {
namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = u(rng);
    return m;
}

Matrix tile(const Matrix& row, std::size_t rows, std::size_t repeats = 1) {
    Matrix out(rows, row.cols() * repeats);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < repeats; ++k) {
            for (std::size_t c = 0; c < row.cols(); ++c) out(r, k * row.cols() + c) = row(0, c);
        }
    }
    return out;
}

Matrix reciprocal(const Matrix& m) {
    Matrix out = m;
    for (double& v : out.values()) v = 1.0 / v;
    return out;
}

void column_stats(const std::vector<std::vector<double>>& rows, std::size_t width, Matrix& mean,
                  Matrix& scale) {
    mean = Matrix(1, width);
    scale = Matrix(1, width, 1.0);
    if (rows.empty()) return;
    const double count = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < width; ++c) mean(0, c) += r[c];
    }
    for (std::size_t c = 0; c < width; ++c) mean(0, c) /= count;
    Matrix var(1, width);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < width; ++c) {
            const double d = r[c] - mean(0, c);
            var(0, c) += d * d;
        }
    }
    for (std::size_t c = 0; c < width; ++c) {
        const double sd = std::sqrt(var(0, c) / count);
        scale(0, c) = sd > 1e-12 ? sd : 1.0;
    }
}

} // namespace

void ModelConfig::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("layer_dims", "need at least one GCN layer");
    if (layer_dims.front() != kFeatureWidth) {
        throw ConfigError("layer_dims", "first entry must equal the feature width " +
                                            std::to_string(kFeatureWidth));
    }
    for (auto d : layer_dims) {
        if (d == 0) throw ConfigError("layer_dims", "dimensions must be positive");
    }
    if (history == 0) throw ConfigError("history", "must be positive");
    if (horizon == 0) throw ConfigError("horizon", "must be positive");
    if (state_dim_out != kStateDim) {
        throw ConfigError("state_dim_out", "must be " + std::to_string(kStateDim));
    }
}

std::vector<std::string> EvolveGcnParams::names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < initial_weights.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back(p + "w0");
        for (const char* g : {"wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"}) {
            out.push_back(p + "gru." + g);
        }
    }
    out.emplace_back("readout.weight");
    out.emplace_back("readout.bias");
    return out;
}

std::vector<Matrix*> EvolveGcnParams::tensors() {
    std::vector<Matrix*> out;
    for (std::size_t l = 0; l < initial_weights.size(); ++l) {
        auto& g = grus.at(l);
        for (Matrix* m : {&initial_weights[l], &g.wz, &g.uz, &g.bz, &g.wr, &g.ur, &g.br, &g.wh,
                          &g.uh, &g.bh}) {
            out.push_back(m);
        }
    }
    out.push_back(&readout_weight);
    out.push_back(&readout_bias);
    return out;
}

std::vector<const Matrix*> EvolveGcnParams::tensors() const {
    auto mut = const_cast<EvolveGcnParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::size_t EvolveGcnParams::scalar_count() const {
    std::size_t n = 0;
    for (const Matrix* m : tensors()) n += m->size();
    return n;
}

Standardizer Standardizer::identity() {
    return {Matrix(1, kFeatureWidth), Matrix(1, kFeatureWidth, 1.0), Matrix(1, kStateDim),
            Matrix(1, kStateDim, 1.0)};
}

Standardizer Standardizer::fit(std::span<const ScenarioTrajectory> trajectories) {
    std::vector<std::vector<double>> feature_rows;
    std::vector<std::vector<double>> state_rows;
    for (const auto& traj : trajectories) {
        for (std::size_t t = 0; t < traj.step_count(); ++t) {
            const Matrix h = node_features(traj.states[t], traj.adjacency[t]);
            for (std::size_t i = 0; i < h.rows(); ++i) {
                feature_rows.emplace_back(&h(i, 0), &h(i, 0) + kFeatureWidth);
                const auto s = traj.states[t][i].to_array();
                state_rows.emplace_back(s.begin(), s.end());
            }
        }
    }
    Standardizer st;
    column_stats(feature_rows, kFeatureWidth, st.feature_mean, st.feature_scale);
    column_stats(state_rows, kStateDim, st.state_mean, st.state_scale);
    return st;
}

EvolveGcnParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    EvolveGcnParams p;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const std::size_t r = cfg.layer_dims[l];
        const std::size_t c = cfg.layer_dims[l + 1];
        p.initial_weights.push_back(glorot(r, c, rng));
        MatrixGru g;
        g.wz = glorot(r, c, rng);
        g.uz = glorot(r, c, rng);
        g.bz = Matrix(r, c);
        g.wr = glorot(r, c, rng);
        g.ur = glorot(r, c, rng);
        g.br = Matrix(r, c);
        g.wh = glorot(r, c, rng);
        g.uh = glorot(r, c, rng);
        g.bh = Matrix(r, c);
        p.grus.push_back(std::move(g));
    }
    p.readout_weight = glorot(cfg.readout_input_width(), cfg.output_width(), rng);
    p.readout_bias = Matrix(1, cfg.output_width());
    return p;
}

RelativeState PredictionBatch::state(std::size_t step, std::size_t agent) const {
    std::array<double, 6> s{};
    for (std::size_t k = 0; k < kStateDim; ++k) s[k] = values(agent, step * kStateDim + k);
    return RelativeState::from_array(s);
}

Vec3 PredictionBatch::position(std::size_t step, std::size_t agent) const {
    return state(step, agent).position();
}

Vec3 PredictionBatch::velocity(std::size_t step, std::size_t agent) const {
    return state(step, agent).velocity();
}

Matrix summarize(const Matrix& h, std::size_t out_cols) {
    if (h.rows() == 0) throw ContractError("summarize: empty feature matrix");
    Matrix z(h.cols(), out_cols);
    for (std::size_t c = 0; c < h.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < h.rows(); ++r) s += h(r, c);
        const double mean = s * (1.0 / static_cast<double>(h.rows()));
        for (std::size_t j = 0; j < out_cols; ++j) z(c, j) = mean;
    }
    return z;
}

Matrix gru_evolve(const Matrix& w_prev, const Matrix& z, const MatrixGru& g) {
    for (const Matrix* m : {&z, &g.wz, &g.uz, &g.bz, &g.wr, &g.ur, &g.br, &g.wh, &g.uh, &g.bh}) {
        kernels::require_same_shape(w_prev, *m, "gru_evolve");
    }
    Matrix out(w_prev.rows(), w_prev.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double w = w_prev[i];
        const double update = sigmoid(g.wz[i] * z[i] + g.uz[i] * w + g.bz[i]);
        const double reset = sigmoid(g.wr[i] * z[i] + g.ur[i] * w + g.br[i]);
        const double candidate = std::tanh(g.wh[i] * z[i] + g.uh[i] * (reset * w) + g.bh[i]);
        out[i] = kernels::blend(w, candidate, update);
    }
    return out;
}

Matrix gcn_forward(const Matrix& a_hat, const Matrix& h, const Matrix& w, bool hidden) {
    Matrix out = kernels::matmul(kernels::matmul(a_hat, h), w);
    if (hidden) {
        for (double& v : out.values()) v = std::tanh(v);
    }
    return out;
}

ForwardResult model_forward(std::span<const GraphSnapshot> window, const Model& model,
                            const LayerWeights* start) {
    const auto& cfg = model.config;
    if (window.size() != cfg.history) {
        throw ContractError("model_forward: window has " + std::to_string(window.size()) +
                            " snapshots, expected " + std::to_string(cfg.history));
    }
    const auto& p = model.params;
    const auto& st = model.standardizer;
    LayerWeights weights = start != nullptr ? *start : p.initial_weights;
    if (weights.size() != cfg.layer_count()) {
        throw ContractError("model_forward: carried state has the wrong layer count");
    }

    ForwardResult result;
    Matrix top;
    Matrix input;
    for (std::size_t t = 0; t < window.size(); ++t) {
        const auto& snap = window[t];
        const std::size_t n = snap.features.rows();
        input = snap.features;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < kFeatureWidth; ++c) {
                input(r, c) = (input(r, c) - st.feature_mean(0, c)) * (1.0 / st.feature_scale(0, c));
            }
        }
        Matrix h = input;
        for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
            weights[l] = gru_evolve(weights[l], summarize(h, cfg.layer_dims[l + 1]), p.grus[l]);
            h = gcn_forward(snap.normalized, h, weights[l], l + 1 < cfg.layer_count());
        }
        top = std::move(h);
        if (t == 0) result.carry = weights;
    }

    const std::size_t n = top.rows();
    Matrix joined(n, top.cols() + kFeatureWidth);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < top.cols(); ++c) joined(r, c) = top(r, c);
        for (std::size_t c = 0; c < kFeatureWidth; ++c) joined(r, top.cols() + c) = input(r, c);
    }
    Matrix out = kernels::matmul(joined, p.readout_weight);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const std::size_t k = c % kStateDim;
            out(r, c) = (out(r, c) + p.readout_bias(0, c)) * st.state_scale(0, k) +
                        st.state_mean(0, k);
        }
    }
    result.prediction = PredictionBatch{cfg.horizon, std::move(out)};
    result.final_weights = std::move(weights);
    return result;
}

EvolveGcnGraph::EvolveGcnGraph(Tape& tape, const Model& model, bool track_parameters)
    : tape_(tape), model_(model) {
    model.config.validate();
    ParamId id = 0;
    for (const Matrix* m : model.params.tensors()) {
        all_.push_back(track_parameters ? tape.parameter(*m, id) : tape.constant(*m));
        ++id;
    }
    bind_parameters();
}

EvolveGcnGraph::EvolveGcnGraph(Tape& tape, const Model& model, std::span<const Var> parameters)
    : tape_(tape), model_(model), all_(parameters.begin(), parameters.end()) {
    model.config.validate();
    const auto tensors = model.params.tensors();
    if (all_.size() != tensors.size()) {
        throw DimensionError("EvolveGcnGraph: expected " + std::to_string(tensors.size()) +
                             " parameter nodes, got " + std::to_string(all_.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!tape.value(all_[i]).same_shape(*tensors[i])) {
            throw DimensionError("EvolveGcnGraph: parameter " + std::to_string(i) + " has shape " +
                                 tape.value(all_[i]).shape_string() + ", expected " +
                                 tensors[i]->shape_string());
        }
    }
    bind_parameters();
}

void EvolveGcnGraph::bind_parameters() {
    const std::size_t layers = model_.config.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t base = l * 10;
        initial_.push_back(all_[base]);
        grus_.push_back({all_[base + 1], all_[base + 2], all_[base + 3], all_[base + 4],
                         all_[base + 5], all_[base + 6], all_[base + 7], all_[base + 8],
                         all_[base + 9]});
    }
    readout_weight_ = all_[layers * 10];
    readout_bias_ = all_[layers * 10 + 1];
}

Var EvolveGcnGraph::tiled_constant(const Matrix& row, std::size_t rows) {
    return tape_.constant(tile(row, rows));
}

Var EvolveGcnGraph::standardize_features(Var raw) {
    const std::size_t n = tape_.value(raw).rows();
    if (n != cached_rows_) {
        const auto& st = model_.standardizer;
        const std::size_t h = model_.config.horizon;
        feature_mean_ = tiled_constant(st.feature_mean, n);
        feature_inv_scale_ = tiled_constant(reciprocal(st.feature_scale), n);
        out_scale_ = tape_.constant(tile(st.state_scale, n, h));
        out_mean_ = tape_.constant(tile(st.state_mean, n, h));
        cached_rows_ = n;
    }
    return tape_.hadamard(tape_.sub(raw, feature_mean_), feature_inv_scale_);
}

Var EvolveGcnGraph::summarize(Var h, std::size_t out_cols) {
    return tape_.tile_columns(tape_.mean_rows(h), out_cols);
}

Var EvolveGcnGraph::gru_evolve(Var w_prev, Var z, const GruVars& g) {
    auto& t = tape_;
    const Var update = t.sigmoid(t.add(t.add(t.hadamard(g.wz, z), t.hadamard(g.uz, w_prev)), g.bz));
    const Var reset = t.sigmoid(t.add(t.add(t.hadamard(g.wr, z), t.hadamard(g.ur, w_prev)), g.br));
    const Var candidate = t.tanh(
        t.add(t.add(t.hadamard(g.wh, z), t.hadamard(g.uh, t.hadamard(reset, w_prev))), g.bh));

    return t.blend(w_prev, candidate, update);
}

Var EvolveGcnGraph::gcn(Var a_hat, Var h, Var w, bool hidden) {
    const Var out = tape_.matmul(tape_.matmul(a_hat, h), w);
    return hidden ? tape_.tanh(out) : out;
}

Var EvolveGcnGraph::step(Var normalized_adjacency, Var standardized_features, WeightVars& weights) {
    const auto& cfg = model_.config;
    Var h = standardized_features;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        weights[l] = gru_evolve(weights[l], summarize(h, cfg.layer_dims[l + 1]), grus_[l]);
        h = gcn(normalized_adjacency, h, weights[l], l + 1 < cfg.layer_count());
    }
    return h;
}

Var EvolveGcnGraph::readout(Var top_embedding, Var standardized_features) {
    const std::size_t n = tape_.value(top_embedding).rows();
    if (n != cached_rows_) {
        throw ContractError("readout: standardize_features was not called for " +
                            std::to_string(n) + " agents");
    }
    const Var joined = tape_.hconcat(top_embedding, standardized_features);
    const Var affine = tape_.add(tape_.matmul(joined, readout_weight_),
                                 tape_.tile_rows(readout_bias_, n));
    return tape_.add(tape_.hadamard(affine, out_scale_), out_mean_);
}

} // namespace orbitgraph
