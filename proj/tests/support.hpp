#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "orbitgraph/cw.hpp"
#include "orbitgraph/egcn.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/matrix.hpp"
#include "orbitgraph/scenario.hpp"

namespace testing {

using orbitgraph::Matrix;

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = u(rng);
    return m;
}

// Uniform in a ball of radius r (km); velocity in [-v, v]^3 (km/s).
inline orbitgraph::RelativeState random_state(std::mt19937_64& rng, double r = 5.0,
                                              double v = 5e-3) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double x, y, z;
    do {
        x = u(rng);
        y = u(rng);
        z = u(rng);
    } while (x * x + y * y + z * z > 1.0);
    return {r * x, r * y, r * z, v * u(rng), v * u(rng), v * u(rng)};
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Symmetric 0/1 matrix with unit diagonal.
inline Matrix random_adjacency(std::mt19937_64& rng, std::size_t n, double p = 0.5) {
    std::bernoulli_distribution edge(p);
    Matrix a = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (edge(rng)) a(i, j) = a(j, i) = 1.0;
        }
    }
    return a;
}

inline orbitgraph::ScenarioConfig small_scenario(int trajectories = 6,
                                                 int steps = 24, int agents = 3) {
    orbitgraph::ScenarioConfig cfg;
    cfg.trajectory_count = trajectories;
    cfg.step_count = steps;
    cfg.agents_min = agents;
    cfg.agents_max = agents;
    return cfg;
}

inline orbitgraph::ModelConfig small_model(std::size_t hidden = 8) {
    orbitgraph::ModelConfig cfg;
    cfg.layer_dims = {orbitgraph::kFeatureWidth, hidden, hidden};
    return cfg;
}

// Permutation matrix P with (P X)[i] = X[perm[i]].
inline Matrix permutation_matrix(const std::vector<std::size_t>& perm) {
    Matrix p(perm.size(), perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) p(i, perm[i]) = 1.0;
    return p;
}

} // namespace testing
