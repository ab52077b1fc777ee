#pragma once

#include <cstddef>
#include <vector>

#include "orbitgraph/cw.hpp"
#include "orbitgraph/egcn.hpp"
#include "orbitgraph/matrix.hpp"
#include "orbitgraph/tape.hpp"

namespace orbitgraph {

struct LossConfig {
    double lambda_p = 1.0;
    double lambda_v = 1.0;
    double lambda_phys_start = 0.2;
    double lambda_phys_max = 0.25;
    // false pins lambda_phys to 0 (the data-only arm).
    bool physics_enabled = true;

    void validate() const;
    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/**
 * lambda_p * sum |p^ - p|^2 + lambda_v * sum |v^ - v|^2 over horizon steps and
 * agents, divided by horizon * agents. `truth` has the PredictionBatch layout.
 */
double data_loss(const PredictionBatch& pred, const Matrix& truth, double lambda_p,
                 double lambda_v);

// Backward difference (v_t - v_prev) / dt.
Vec3 fd_acceleration(const Vec3& v_t, const Vec3& v_prev, double dt);

/// Per (step, agent) quantities entering the physics residual.
struct PhysicsResiduals {
    std::size_t horizon = 0;
    std::size_t agents = 0;
    std::vector<Vec3> fd_acceleration;   // [step * agents + agent]
    std::vector<Vec3> cw_acceleration;   // at the predicted state
    std::vector<Vec3> cw_position;       // previous prediction advanced by dt
};

/**
 * `last_observed` is [agents x 6], the final history state. Step 0 differences
 * and propagates from it; later steps chain from the previous prediction.
 */
PhysicsResiduals physics_residuals(const PredictionBatch& pred, const Matrix& last_observed,
                                   double n, double dt);

struct PhysicsTerms {
    double acceleration = 0.0;  // mean |a^ - a_cw|_1
    double position = 0.0;      // mean |p^_cw - p|_1
    double total() const { return acceleration + position; }
};

PhysicsTerms physics_terms(const PredictionBatch& pred, const Matrix& last_observed,
                           const Matrix& truth, double n, double dt);
double physics_loss(const PredictionBatch& pred, const Matrix& last_observed, const Matrix& truth,
                    double n, double dt);

double total_loss(double data, double physics, double lambda_phys);

// start + (max - start) * epoch / (total_epochs - 1); start when total_epochs == 1.
double lambda_phys_schedule(std::size_t epoch, std::size_t total_epochs, double start = 0.2,
                            double max = 0.25);

/**
 * Tape form of the data and physics losses for one trajectory. The
 * physics residuals are linear in the prediction, so they are assembled from
 * constant selection / CW operator matrices built once per (n, dt).
 */
class LossGraph {
public:
    LossGraph(Tape& tape, std::size_t horizon, double n, double dt);

    Var data(Var pred, const Matrix& truth, double lambda_p, double lambda_v);
    Var physics(Var pred, Var last_observed, const Matrix& truth);
    Var total(Var data, Var physics, double lambda_phys);

private:
    Tape& tape_;
    std::size_t horizon_;
    double dt_;
    Matrix position_mask_;
    Matrix velocity_mask_;
    Var select_position_;
    Var select_velocity_;
    Var cw_acceleration_;
    Var cw_transition_;
};

} // namespace orbitgraph
