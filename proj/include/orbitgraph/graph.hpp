#pragma once

#include <span>
#include <vector>

#include "orbitgraph/cw.hpp"
#include "orbitgraph/matrix.hpp"

namespace orbitgraph {

inline constexpr std::size_t kStateDim = 6;
// [px, py, pz, vx, vy, vz, degree, mean-rel-p (3), mean-rel-v (3)]
inline constexpr std::size_t kFeatureWidth = 13;
inline constexpr std::size_t kDegreeColumn = 6;

/// Sensing graph and node embeddings at one timestep.
struct GraphSnapshot {
    Matrix adjacency;    // binary, unit diagonal
    Matrix normalized;   // D^-1/2 A D^-1/2
    Matrix features;     // [agents x kFeatureWidth], physical units
};

double pairwise_distance(const Vec3& a, const Vec3& b);

// Edge density (self-loops included) of the threshold graph: ones(A) / N^2.
double edge_density(const Matrix& adjacency);

/**
 * Smallest candidate threshold (0 or a pairwise distance) whose graph has
 * edge density >= target_density. Single agent -> 0.
 */
double calibrate_sensing_range(std::span<const Vec3> positions, double target_density);

// A[i][j] = 1 iff i == j or |p_i - p_j| <= range.
Matrix build_adjacency(std::span<const Vec3> positions, double range);

// D^-1/2 A D^-1/2 with D the row sums of A. A must carry its own self-loops.
Matrix normalize_adjacency(const Matrix& adjacency);

/**
 * Per-agent embedding: own state, neighbor count, and mean over sensed
 * neighbors (self excluded) of neighbor-minus-own position and velocity.
 * Agents without neighbors get zero relative means.
 */
Matrix node_features(std::span<const RelativeState> states, const Matrix& adjacency);

// Linear map M with node_features relative block == M * X for an [N x 6]
// state matrix X: M = D_nbr^-1 (A - I) - diag(has_neighbor).
Matrix neighbor_difference_operator(const Matrix& adjacency);

// Degree column (row sums minus self-loop), [N x 1].
Matrix degree_column(const Matrix& adjacency);

Matrix states_to_matrix(std::span<const RelativeState> states);

GraphSnapshot make_snapshot(std::span<const RelativeState> states, const Matrix& adjacency);

} // namespace orbitgraph
