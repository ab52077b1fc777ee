#include "orbitgraph/physics_loss.hpp"

#include <cmath>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/kernels.hpp"

namespace orbitgraph {
namespace {

void require_layout(const PredictionBatch& pred, const Matrix& truth) {
    if (!pred.values.same_shape(truth)) {
        throw DimensionError("loss: prediction " + pred.values.shape_string() + " vs truth " +
                             truth.shape_string());
    }
    if (pred.values.cols() != pred.horizon * kStateDim) {
        throw DimensionError("loss: prediction width does not match horizon");
    }
}

Matrix tile_rows(const Matrix& row, std::size_t rows) {
    Matrix m(rows, row.cols());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < row.cols(); ++c) m(r, c) = row(0, c);
    }
    return m;
}

RelativeState row_state(const Matrix& m, std::size_t row, std::size_t offset) {
    std::array<double, 6> s{};
    for (std::size_t k = 0; k < kStateDim; ++k) s[k] = m(row, offset + k);
    return RelativeState::from_array(s);
}

} // namespace

void LossConfig::validate() const {
    if (!(lambda_p >= 0.0)) throw ConfigError("lambda_p", "must be non-negative");
    if (!(lambda_v >= 0.0)) throw ConfigError("lambda_v", "must be non-negative");
    if (!(lambda_phys_start >= 0.0)) throw ConfigError("lambda_phys_start", "must be non-negative");
    if (!(lambda_phys_max >= lambda_phys_start)) {
        throw ConfigError("lambda_phys_max", "must be >= lambda_phys_start");
    }
}

double data_loss(const PredictionBatch& pred, const Matrix& truth, double lambda_p,
                 double lambda_v) {
    require_layout(pred, truth);
    double pos = 0.0;
    double vel = 0.0;
    for (std::size_t i = 0; i < pred.agents(); ++i) {
        for (std::size_t k = 0; k < pred.horizon; ++k) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double dp = pred.values(i, k * 6 + c) - truth(i, k * 6 + c);
                const double dv = pred.values(i, k * 6 + 3 + c) - truth(i, k * 6 + 3 + c);
                pos += dp * dp;
                vel += dv * dv;
            }
        }
    }
    const double count = static_cast<double>(pred.horizon * pred.agents());
    return (lambda_p * pos + lambda_v * vel) / count;
}

Vec3 fd_acceleration(const Vec3& v_t, const Vec3& v_prev, double dt) {
    if (!(dt > 0.0)) throw DomainError("fd_acceleration: dt must be positive");
    return {(v_t[0] - v_prev[0]) / dt, (v_t[1] - v_prev[1]) / dt, (v_t[2] - v_prev[2]) / dt};
}

PhysicsResiduals physics_residuals(const PredictionBatch& pred, const Matrix& last_observed,
                                   double n, double dt) {
    if (last_observed.rows() != pred.agents() || last_observed.cols() != kStateDim) {
        throw DimensionError("physics_residuals: last observed state " +
                             last_observed.shape_string());
    }
    PhysicsResiduals r;
    r.horizon = pred.horizon;
    r.agents = pred.agents();
    for (std::size_t k = 0; k < pred.horizon; ++k) {
        for (std::size_t i = 0; i < pred.agents(); ++i) {
            const RelativeState current = pred.state(k, i);
            const RelativeState previous =
                k == 0 ? row_state(last_observed, i, 0) : pred.state(k - 1, i);
            r.fd_acceleration.push_back(
                fd_acceleration(current.velocity(), previous.velocity(), dt));
            r.cw_acceleration.push_back(cw_acceleration(current, n));
            r.cw_position.push_back(cw_propagate(previous, n, dt).position());
        }
    }
    return r;
}

PhysicsTerms physics_terms(const PredictionBatch& pred, const Matrix& last_observed,
                           const Matrix& truth, double n, double dt) {
    require_layout(pred, truth);
    const PhysicsResiduals r = physics_residuals(pred, last_observed, n, dt);
    PhysicsTerms terms;
    for (std::size_t k = 0; k < r.horizon; ++k) {
        for (std::size_t i = 0; i < r.agents; ++i) {
            const std::size_t idx = k * r.agents + i;
            for (std::size_t c = 0; c < 3; ++c) {
                terms.acceleration += std::abs(r.fd_acceleration[idx][c] - r.cw_acceleration[idx][c]);
                terms.position += std::abs(r.cw_position[idx][c] - truth(i, k * 6 + c));
            }
        }
    }
    const double count = static_cast<double>(r.horizon * r.agents);
    terms.acceleration /= count;
    terms.position /= count;
    return terms;
}

double physics_loss(const PredictionBatch& pred, const Matrix& last_observed, const Matrix& truth,
                    double n, double dt) {
    return physics_terms(pred, last_observed, truth, n, dt).total();
}

double total_loss(double data, double physics, double lambda_phys) {
    if (!(lambda_phys >= 0.0)) throw DomainError("total_loss: lambda_phys must be non-negative");
    return data + lambda_phys * physics;
}

double lambda_phys_schedule(std::size_t epoch, std::size_t total_epochs, double start, double max) {
    if (total_epochs == 0 || epoch >= total_epochs) {
        throw ContractError("lambda_phys_schedule: epoch " + std::to_string(epoch) +
                            " outside [0, " + std::to_string(total_epochs) + ")");
    }
    if (total_epochs == 1) return start;
    return start + (max - start) * static_cast<double>(epoch) /
                       static_cast<double>(total_epochs - 1);
}

LossGraph::LossGraph(Tape& tape, std::size_t horizon, double n, double dt)
    : tape_(tape), horizon_(horizon), dt_(dt) {
    if (!(dt > 0.0) || !(n > 0.0)) throw DomainError("LossGraph: n and dt must be positive");
    const std::size_t width = horizon * kStateDim;
    const std::size_t out = horizon * 3;

    position_mask_ = Matrix(1, width);
    velocity_mask_ = Matrix(1, width);
    Matrix pos(width, out);
    Matrix vel(width, out);
    Matrix acc(width, out);
    Matrix stm(width, out);
    const auto phi = cw_transition_matrix(n, dt);
    for (std::size_t k = 0; k < horizon; ++k) {
        const std::size_t in = k * kStateDim;
        const std::size_t o = k * 3;
        for (std::size_t c = 0; c < 3; ++c) {
            position_mask_(0, in + c) = 1.0;
            velocity_mask_(0, in + 3 + c) = 1.0;
            pos(in + c, o + c) = 1.0;
            vel(in + 3 + c, o + c) = 1.0;
        }
        // (3n^2 x + 2n vy, -2n vx, -n^2 z)
        acc(in + 0, o + 0) = 3.0 * n * n;
        acc(in + 4, o + 0) = 2.0 * n;
        acc(in + 3, o + 1) = -2.0 * n;
        acc(in + 2, o + 2) = -n * n;
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t j = 0; j < kStateDim; ++j) stm(in + j, o + r) = phi[r * 6 + j];
        }
    }
    select_position_ = tape.constant(std::move(pos));
    select_velocity_ = tape.constant(std::move(vel));
    cw_acceleration_ = tape.constant(std::move(acc));
    cw_transition_ = tape.constant(std::move(stm));
}

Var LossGraph::data(Var pred, const Matrix& truth, double lambda_p, double lambda_v) {
    const Matrix& p = tape_.value(pred);
    kernels::require_same_shape(p, truth, "data_loss");
    const std::size_t n = p.rows();
    const Var residual = tape_.sub(pred, tape_.constant(truth));
    const Var pos = tape_.sq_l2(tape_.hadamard(residual, tape_.constant(tile_rows(position_mask_, n))));
    const Var vel = tape_.sq_l2(tape_.hadamard(residual, tape_.constant(tile_rows(velocity_mask_, n))));
    const double inv = 1.0 / static_cast<double>(horizon_ * n);
    return tape_.add(tape_.scale(pos, lambda_p * inv), tape_.scale(vel, lambda_v * inv));
}

Var LossGraph::physics(Var pred, Var last_observed, const Matrix& truth) {
    const std::size_t n = tape_.value(pred).rows();
    const Var previous =
        tape_.hconcat(last_observed, tape_.slice_cols(pred, 0, (horizon_ - 1) * kStateDim));
    const Var fd = tape_.scale(tape_.sub(tape_.matmul(pred, select_velocity_),
                                         tape_.matmul(previous, select_velocity_)),
                               1.0 / dt_);
    const Var acc_residual = tape_.sub(fd, tape_.matmul(pred, cw_acceleration_));
    const Var truth_positions = tape_.constant(kernels::matmul(truth, tape_.value(select_position_)));
    const Var pos_residual = tape_.sub(tape_.matmul(previous, cw_transition_), truth_positions);
    const double inv = 1.0 / static_cast<double>(horizon_ * n);
    return tape_.scale(tape_.add(tape_.l1(acc_residual), tape_.l1(pos_residual)), inv);
}

Var LossGraph::total(Var data, Var physics, double lambda_phys) {
    if (lambda_phys == 0.0) return data;
    return tape_.add(data, tape_.scale(physics, lambda_phys));
}

} // namespace orbitgraph
