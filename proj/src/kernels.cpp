#include "orbitgraph/kernels.hpp"

#include <cmath>
#include <string>

#include <omp.h>

#include "orbitgraph/errors.hpp"

namespace orbitgraph::kernels {
namespace {

constexpr std::size_t kParallelFlops = std::size_t{1} << 18;

void require_conforming(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " +
                             b.shape_string());
    }
}

void multiply_rows(const Matrix& a, const Matrix& b, Matrix& c, std::size_t r) {
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    double* out = &c(r, 0);
    for (std::size_t k = 0; k < inner; ++k) {
        const double aik = a(r, k);
        if (aik == 0.0) continue;
        const double* brow = &b(k, 0);
        for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
}

} // namespace

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
    require_conforming(a, b);
    Matrix c(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) multiply_rows(a, b, c, r);
    return c;
}

Matrix matmul_omp(const Matrix& a, const Matrix& b) {
    require_conforming(a, b);
    Matrix c(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        multiply_rows(a, b, c, static_cast<std::size_t>(r));
    }
    return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    const std::size_t flops = a.rows() * a.cols() * b.cols();
    if (flops >= kParallelFlops && a.rows() > 1 && omp_get_max_threads() > 1 &&
        !omp_in_parallel()) {
        return matmul_omp(a, b);
    }
    return matmul_serial(a, b);
}

void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
    // c[i][j] += sum_k a[k][i] * b[k][j]
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw DimensionError("matmul_tn: " + a.shape_string() + "^T * " + b.shape_string() +
                             " into " + c.shape_string());
    }
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* out = &c(i, 0);
            const double* brow = &b(k, 0);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
        }
    }
}

void matmul_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
    // c[i][j] += sum_k a[i][k] * b[j][k]
    if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw DimensionError("matmul_nt: " + a.shape_string() + " * " + b.shape_string() +
                             "^T into " + c.shape_string());
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = &a(i, 0);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = &b(j, 0);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            c(i, j) += acc;
        }
    }
}

Matrix blend(const Matrix& from, const Matrix& to, const Matrix& weight) {
    require_same_shape(from, to, "blend");
    require_same_shape(from, weight, "blend");
    Matrix out(from.rows(), from.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = blend(from[i], to[i], weight[i]);
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    }
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.values()) v *= s;
    return c;
}

double l1(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += std::abs(v);
    return s;
}

double sq_l2(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return s;
}

} // namespace orbitgraph::kernels
