#pragma once

#include <algorithm>

#include "orbitgraph/matrix.hpp"

namespace orbitgraph::kernels {

// from + weight * (to - from), clamped to the segment so that a weight in
// [0, 1] never leaves [min(from, to), max(from, to)] through rounding.
inline double blend(double from, double to, double weight) {
    // Anchored at the nearer endpoint so weight 0 and 1 are exact.
    const double v = weight < 0.5 ? from + weight * (to - from) : to - (1.0 - weight) * (to - from);
    return std::clamp(v, std::min(from, to), std::max(from, to));
}

// Reference implementation; i-k-j loop order.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

// Row-parallel OpenMP variant. Each output entry is accumulated in the same
// order as matmul_serial, so results are bitwise identical.
Matrix matmul_omp(const Matrix& a, const Matrix& b);

// Picks matmul_omp for large products when more than one thread is available.
Matrix matmul(const Matrix& a, const Matrix& b);

// C += A^T * B and C += A * B^T, used by the backward pass.
void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& c);

Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Sum of absolute entries / sum of squared entries.
Matrix blend(const Matrix& from, const Matrix& to, const Matrix& weight);
double l1(const Matrix& a);
double sq_l2(const Matrix& a);

// Throws DimensionError naming both shapes unless a and b have equal shape.
void require_same_shape(const Matrix& a, const Matrix& b, const char* op);

} // namespace orbitgraph::kernels
