#include "orbitgraph/graph.hpp"

#include <algorithm>
#include <cmath>

#include "orbitgraph/errors.hpp"

namespace orbitgraph {

double pairwise_distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double edge_density(const Matrix& adjacency) {
    if (adjacency.rows() == 0) return 0.0;
    double ones = 0.0;
    for (double v : adjacency.values()) ones += v != 0.0 ? 1.0 : 0.0;
    return ones / static_cast<double>(adjacency.size());
}

double calibrate_sensing_range(std::span<const Vec3> positions, double target_density) {
    const std::size_t n = positions.size();
    if (n < 2) return 0.0;

    std::vector<double> distances;
    distances.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            distances.push_back(pairwise_distance(positions[i], positions[j]));
        }
    }
    std::sort(distances.begin(), distances.end());

    const double n2 = static_cast<double>(n * n);
    auto density_at = [&](std::size_t pairs_within) {
        return (static_cast<double>(n) + 2.0 * static_cast<double>(pairs_within)) / n2;
    };

    // Threshold 0 connects only coincident agents.
    const auto coincident = static_cast<std::size_t>(
        std::upper_bound(distances.begin(), distances.end(), 0.0) - distances.begin());
    if (density_at(coincident) >= target_density) return 0.0;

    for (std::size_t k = 0; k < distances.size(); ++k) {
        // Ties: every pair at distances[k] joins together.
        const auto within = static_cast<std::size_t>(
            std::upper_bound(distances.begin(), distances.end(), distances[k]) -
            distances.begin());
        if (density_at(within) >= target_density) return distances[k];
    }
    return distances.back();
}

Matrix build_adjacency(std::span<const Vec3> positions, double range) {
    if (range < 0.0) throw ContractError("build_adjacency: range must be non-negative");
    const std::size_t n = positions.size();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (pairwise_distance(positions[i], positions[j]) <= range) {
                a(i, j) = 1.0;
                a(j, i) = 1.0;
            }
        }
    }
    return a;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) {
        throw DimensionError("normalize_adjacency: non-square " + adjacency.shape_string());
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += adjacency(i, j);
        if (!(d > 0.0)) {
            throw ContractError("normalize_adjacency: row " + std::to_string(i) + " has zero degree");
        }
        inv_sqrt[i] = 1.0 / std::sqrt(d);
    }
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(i, j) = inv_sqrt[i] * adjacency(i, j) * inv_sqrt[j];
    }
    return out;
}

Matrix node_features(std::span<const RelativeState> states, const Matrix& adjacency) {
    const std::size_t n = states.size();
    if (adjacency.rows() != n || adjacency.cols() != n) {
        throw DimensionError("node_features: adjacency " + adjacency.shape_string() + " for " +
                             std::to_string(n) + " agents");
    }
    Matrix h(n, kFeatureWidth);
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = states[i].to_array();
        for (std::size_t k = 0; k < kStateDim; ++k) h(i, k) = own[k];

        std::array<double, kStateDim> rel{};
        std::size_t degree = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || adjacency(i, j) == 0.0) continue;
            ++degree;
            const auto other = states[j].to_array();
            for (std::size_t k = 0; k < kStateDim; ++k) rel[k] += other[k] - own[k];
        }
        h(i, kDegreeColumn) = static_cast<double>(degree);
        if (degree > 0) {
            for (std::size_t k = 0; k < kStateDim; ++k) {
                h(i, kDegreeColumn + 1 + k) = rel[k] / static_cast<double>(degree);
            }
        }
    }
    return h;
}

Matrix neighbor_difference_operator(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t degree = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && adjacency(i, j) != 0.0) ++degree;
        }
        if (degree == 0) continue;
        const double w = 1.0 / static_cast<double>(degree);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && adjacency(i, j) != 0.0) m(i, j) = w;
        }
        m(i, i) = -1.0;
    }
    return m;
}

Matrix degree_column(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    Matrix d(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && adjacency(i, j) != 0.0) d(i, 0) += 1.0;
        }
    }
    return d;
}

Matrix states_to_matrix(std::span<const RelativeState> states) {
    Matrix x(states.size(), kStateDim);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto s = states[i].to_array();
        for (std::size_t k = 0; k < kStateDim; ++k) x(i, k) = s[k];
    }
    return x;
}

GraphSnapshot make_snapshot(std::span<const RelativeState> states, const Matrix& adjacency) {
    return {adjacency, normalize_adjacency(adjacency), node_features(states, adjacency)};
}

} // namespace orbitgraph
