#include "orbitgraph/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "orbitgraph/checkpoint.hpp"
#include "orbitgraph/errors.hpp"
#include "orbitgraph/log.hpp"

namespace orbitgraph {
namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), tag};
    return std::mt19937_64(seq);
}

Matrix state_block(const ScenarioTrajectory& traj, std::size_t step) {
    return states_to_matrix(traj.states[step]);
}

std::vector<Vec3> positions_of(const Matrix& x) {
    std::vector<Vec3> p(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) p[i] = {x(i, 0), x(i, 1), x(i, 2)};
    return p;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
    if (!(ar_ratio_max >= 0.0 && ar_ratio_max <= 1.0)) {
        throw ConfigError("ar_ratio_max", "must lie in [0, 1]");
    }
    if (!(ar_weight > 0.0 && ar_weight <= 1.0)) throw ConfigError("ar_weight", "must lie in (0, 1]");
    if (!(grad_clip > 0.0)) throw ConfigError("grad_clip", "must be positive");
}

Matrix target_matrix(const ScenarioTrajectory& traj, std::size_t first, std::size_t horizon) {
    if (first + horizon > traj.step_count()) {
        throw ContractError("target_matrix: horizon runs past the trajectory end");
    }
    const std::size_t n = traj.agent_count();
    Matrix m(n, horizon * kStateDim);
    for (std::size_t k = 0; k < horizon; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = traj.states[first + k][i].to_array();
            for (std::size_t c = 0; c < kStateDim; ++c) m(i, k * kStateDim + c) = s[c];
        }
    }
    return m;
}

std::vector<WindowPair> sliding_windows(const ScenarioTrajectory& traj, std::size_t history,
                                        std::size_t horizon) {
    std::vector<WindowPair> out;
    const std::size_t steps = traj.step_count();
    if (steps < history + horizon) {
        log_warn("sliding_windows: trajectory " + std::to_string(traj.index) + " has " +
                 std::to_string(steps) + " steps, fewer than history + horizon");
        return out;
    }
    std::vector<GraphSnapshot> snapshots;
    snapshots.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        snapshots.push_back(make_snapshot(traj.states[t], traj.adjacency[t]));
    }
    for (std::size_t s = 0; s + history + horizon <= steps; ++s) {
        WindowPair w;
        w.start = s;
        w.history.assign(snapshots.begin() + static_cast<std::ptrdiff_t>(s),
                         snapshots.begin() + static_cast<std::ptrdiff_t>(s + history));
        w.target = target_matrix(traj, s + history, horizon);
        out.push_back(std::move(w));
    }
    return out;
}

double ar_ratio(std::size_t epoch, std::size_t total_epochs, double ar_ratio_max) {
    if (total_epochs <= 1) return 0.0;
    return ar_ratio_max * static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
}

std::vector<std::size_t> select_autoregressive(std::span<const std::size_t> ids, std::size_t epoch,
                                               std::size_t total_epochs, double ar_ratio_max,
                                               std::uint64_t seed) {
    if (total_epochs == 0 || epoch >= total_epochs) {
        throw ContractError("select_autoregressive: epoch out of range");
    }
    const double ratio = ar_ratio(epoch, total_epochs, ar_ratio_max);
    const auto count = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));
    std::vector<std::size_t> pool(ids.begin(), ids.end());
    auto rng = epoch_rng(seed, epoch, 0x41525231u);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(count, pool.size()));
    std::sort(pool.begin(), pool.end());
    return pool;
}

RolloutResult rollout_trajectory(const ScenarioTrajectory& traj, const Model& model,
                                 const RolloutOptions& options) {
    const auto& cfg = model.config;
    const std::size_t history = cfg.history;
    const std::size_t horizon = cfg.horizon;
    const std::size_t steps = traj.step_count();
    if (steps < history + horizon) {
        throw ContractError("rollout_trajectory: trajectory " + std::to_string(traj.index) +
                            " is shorter than one window");
    }
    const auto& loss = options.loss;

    Tape tape;
    EvolveGcnGraph net(tape, model, options.compute_gradients);
    LossGraph losses(tape, horizon, traj.chief.n, traj.dt);
    auto weights = net.initial_weights();

    // Predicted states fed back in autoregressive mode, indexed by step.
    std::vector<Var> fed_back(steps);

    RolloutResult result;
    Var loss_sum;
    double data_sum = 0.0;
    double physics_sum = 0.0;
    const std::size_t last_window_end = steps - horizon - 1;

    for (std::size_t t = 0; t <= last_window_end; ++t) {
        Var state;
        Var raw_features;
        Matrix adjacency;
        if (options.autoregressive && fed_back[t].valid()) {
            state = fed_back[t];
            adjacency = options.rebuild_graph
                            ? build_adjacency(positions_of(tape.value(state)), traj.sensing_range)
                            : traj.adjacency[t];
            const Var degrees = tape.constant(degree_column(adjacency));
            const Var relative =
                tape.matmul(tape.constant(neighbor_difference_operator(adjacency)), state);
            raw_features = tape.hconcat(tape.hconcat(state, degrees), relative);
        } else {
            adjacency = traj.adjacency[t];
            raw_features = tape.constant(node_features(traj.states[t], adjacency));
            if (t + 1 >= history) state = tape.constant(state_block(traj, t));
        }
        const Var normalized = tape.constant(normalize_adjacency(adjacency));
        const Var features = net.standardize_features(raw_features);
        const Var top = net.step(normalized, features, weights);

        if (t + 1 < history) continue;

        const Var pred = net.readout(top, features);
        Matrix target = target_matrix(traj, t + 1, horizon);
        const Var data = losses.data(pred, target, loss.lambda_p, loss.lambda_v);
        const Var physics = losses.physics(pred, state, target);
        const Var total = losses.total(data, physics, options.lambda_phys);

        const double value = tape.scalar(total);
        if (!std::isfinite(value)) {
            throw TrainingError("non-finite loss in trajectory " + std::to_string(traj.index) +
                                " at window " + std::to_string(result.windows) + " (start step " +
                                std::to_string(t + 1 - history) + ")");
        }
        data_sum += tape.scalar(data);
        physics_sum += tape.scalar(physics);
        loss_sum = loss_sum.valid() ? tape.add(loss_sum, total) : total;
        ++result.windows;

        if (options.autoregressive && t + 1 < steps) {
            fed_back[t + 1] = tape.slice_cols(pred, 0, kStateDim);
        }
        if (options.keep_predictions) {
            result.outputs.push_back({t + 1 - history, t + 1, PredictionBatch{horizon, tape.value(pred)},
                                      std::move(target), tape.value(state)});
        }
    }

    const double inv = 1.0 / static_cast<double>(result.windows);
    const Var mean = tape.scale(loss_sum, inv);
    result.loss = tape.scalar(mean);
    result.data_loss = data_sum * inv;
    result.physics_loss = physics_sum * inv;
    if (options.compute_gradients) result.gradients = tape.backward(mean);
    return result;
}

double global_norm(const Gradients& grads) {
    double s = 0.0;
    for (const auto& [id, g] : grads) {
        for (double v : g.values()) s += v * v;
    }
    return std::sqrt(s);
}

double clip_gradients(Gradients& grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm <= max_norm) return norm;
    double current = norm;
    // Rounding can leave the rescaled norm an ulp above the bound.
    for (int attempt = 0; attempt < 16 && current > max_norm; ++attempt) {
        const double factor = std::nextafter(max_norm / current, 0.0);
        for (auto& [id, g] : grads) {
            for (double& v : g.values()) v *= factor;
        }
        current = global_norm(grads);
    }
    return norm;
}

AdamOptimizer::AdamOptimizer(const TrainConfig& cfg, const EvolveGcnParams& params)
    : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), epsilon_(cfg.epsilon) {
    for (const Matrix* p : params.tensors()) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
    }
}

void AdamOptimizer::step(EvolveGcnParams& params, const Gradients& grads) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    auto tensors = params.tensors();
    for (std::size_t id = 0; id < tensors.size(); ++id) {
        const auto it = grads.find(id);
        if (it == grads.end()) continue;
        Matrix& p = *tensors[id];
        const Matrix& g = it->second;
        Matrix& m = m_[id];
        Matrix& v = v_[id];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

double epoch_lambda_phys(const LossConfig& loss, std::size_t epoch, std::size_t total_epochs) {
    if (!loss.physics_enabled) return 0.0;
    return lambda_phys_schedule(epoch, total_epochs, loss.lambda_phys_start, loss.lambda_phys_max);
}

double weighted_epoch_loss(std::span<const double> losses, std::span<const double> weights) {
    if (losses.size() != weights.size() || losses.empty()) {
        throw ContractError("weighted_epoch_loss: need matching, non-empty inputs");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        num += weights[i] * losses[i];
        den += weights[i];
    }
    return num / den;
}

double validation_loss(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                       const LossConfig& loss, double lambda_phys) {
    if (trajectories.empty()) throw ContractError("validation_loss: no trajectories");
    RolloutOptions opt;
    opt.compute_gradients = false;
    opt.lambda_phys = lambda_phys;
    opt.loss = loss;
    const auto count = static_cast<std::ptrdiff_t>(trajectories.size());
    std::vector<double> per(trajectories.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        per[static_cast<std::size_t>(i)] =
            rollout_trajectory(trajectories[static_cast<std::size_t>(i)], model, opt).loss;
    }
    double s = 0.0;
    for (double v : per) s += v;
    return s / static_cast<double>(per.size());
}

double validation_loss_serial(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                              const LossConfig& loss, double lambda_phys) {
    if (trajectories.empty()) throw ContractError("validation_loss: no trajectories");
    RolloutOptions opt;
    opt.compute_gradients = false;
    opt.lambda_phys = lambda_phys;
    opt.loss = loss;
    double s = 0.0;
    for (const auto& traj : trajectories) s += rollout_trajectory(traj, model, opt).loss;
    return s / static_cast<double>(trajectories.size());
}

EpochReport train_epoch(const DatasetSplit& data, Model& model, AdamOptimizer& optimizer,
                        const EpochContext& ctx) {
    if (data.train.empty()) throw ContractError("train_epoch: empty train split");
    const auto start = std::chrono::steady_clock::now();
    const auto& tc = ctx.train;

    EpochReport report;
    report.epoch = ctx.epoch;
    report.lambda_phys = epoch_lambda_phys(ctx.loss, ctx.epoch, ctx.total_epochs);
    report.ar_ratio = ar_ratio(ctx.epoch, ctx.total_epochs, tc.ar_ratio_max);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto ar_ids =
        select_autoregressive(order, ctx.epoch, ctx.total_epochs, tc.ar_ratio_max, tc.seed);
    auto rng = epoch_rng(tc.seed, ctx.epoch, 0x4f524452u);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> losses;
    std::vector<double> weights;
    for (const std::size_t idx : order) {
        const bool ar = std::binary_search(ar_ids.begin(), ar_ids.end(), idx);
        RolloutOptions opt;
        opt.autoregressive = ar;
        opt.rebuild_graph = tc.ar_rebuild_graph;
        opt.lambda_phys = report.lambda_phys;
        opt.loss = ctx.loss;
        RolloutResult r = rollout_trajectory(data.train[idx], model, opt);
        clip_gradients(r.gradients, tc.grad_clip);
        optimizer.step(model.params, r.gradients);
        losses.push_back(r.loss);
        weights.push_back(ar ? tc.ar_weight : 1.0);
    }
    report.train_loss = weighted_epoch_loss(losses, weights);

    if (!data.validation.empty()) {
        report.val_loss = validation_loss(data.validation, model, ctx.loss, report.lambda_phys);
    } else {
        report.val_loss = report.train_loss;
    }
    if (!std::isfinite(report.train_loss) || !std::isfinite(report.val_loss)) {
        throw TrainingError("epoch " + std::to_string(ctx.epoch) + " produced a non-finite loss");
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

FitResult fit(const DatasetSplit& data, const TrainConfig& train, const ModelConfig& model_cfg,
              const LossConfig& loss, const FitOptions& options) {
    train.validate();
    model_cfg.validate();
    loss.validate();
    if (data.validation.empty()) {
        log_warn("fit: no validation trajectories; best-checkpoint tracking uses train loss");
    }

    Model model{model_cfg, init_params(model_cfg, train.model_seed), Standardizer::fit(data.train)};
    AdamOptimizer optimizer(train, model.params);

    std::ofstream log_file;
    if (!options.output_dir.empty()) {
        std::filesystem::create_directories(options.output_dir);
        log_file.open(std::filesystem::path(options.output_dir) / "train_log.csv", std::ios::trunc);
        log_file << "epoch,train_loss,val_loss,lambda_phys,ar_ratio,seconds\n";
        log_file.flush();
    }

    FitResult result;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        EpochContext ctx{epoch, train.epochs, train, loss};
        const EpochReport report = train_epoch(data, model, optimizer, ctx);
        result.reports.push_back(report);
        log_info("epoch " + std::to_string(epoch) + " train " + std::to_string(report.train_loss) +
                 " val " + std::to_string(report.val_loss));

        const bool improved = report.val_loss < best;
        if (improved) {
            best = report.val_loss;
            result.best = model;
            result.best_epoch = epoch;
        }
        if (log_file.is_open()) {
            std::ostringstream row;
            row << std::setprecision(17) << epoch << ',' << report.train_loss << ','
                << report.val_loss << ',' << report.lambda_phys << ',' << report.ar_ratio << ','
                << std::setprecision(6) << report.seconds << '\n';
            log_file << row.str();
            log_file.flush();

            const std::filesystem::path dir(options.output_dir);
            if (improved) {
                save_checkpoint({model, options.label, epoch}, (dir / "checkpoint_best.json").string());
            }
            if (train.checkpoint_every > 0 && (epoch + 1) % train.checkpoint_every == 0) {
                std::ostringstream name;
                name << "checkpoint_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".json";
                save_checkpoint({model, options.label, epoch}, (dir / name.str()).string());
            }
        }
    }
    result.last = std::move(model);
    return result;
}

} // namespace orbitgraph
