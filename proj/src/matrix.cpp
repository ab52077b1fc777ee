#include "orbitgraph/matrix.hpp"

#include <cmath>

#include "orbitgraph/errors.hpp"

namespace orbitgraph {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: " + std::to_string(values_.size()) +
                             " values given for shape " + shape_string());
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
        v.insert(v.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(v));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double Matrix::item() const {
    if (rows_ != 1 || cols_ != 1) {
        throw ContractError("Matrix::item on non-scalar " + shape_string());
    }
    return values_[0];
}

bool Matrix::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Matrix::shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

std::string shape_of(const Matrix& m) { return m.shape_string(); }

} // namespace orbitgraph
