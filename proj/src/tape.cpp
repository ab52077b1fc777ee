#include "orbitgraph/tape.hpp"

#include <cmath>
#include <string>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/kernels.hpp"

namespace orbitgraph {
namespace {

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void accumulate(Matrix& into, const Matrix& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

} // namespace

Var Tape::push(TapeNode node) {
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const TapeNode& Tape::at(Var v) const {
    if (!v.valid() || v.index >= nodes_.size()) {
        throw ContractError("Tape: invalid variable handle");
    }
    return nodes_[v.index];
}

const TapeNode& Tape::node(Var v) const { return at(v); }

const Matrix& Tape::value(Var v) const { return at(v).value; }

Var Tape::constant(Matrix m) {
    TapeNode n;
    n.op = OpKind::Constant;
    n.value = std::move(m);
    return push(std::move(n));
}

Var Tape::parameter(Matrix m, ParamId id) {
    TapeNode n;
    n.op = OpKind::Parameter;
    n.value = std::move(m);
    n.aux = id;
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const auto& na = at(a);
    const auto& nb = at(b);
    TapeNode n;
    n.op = OpKind::MatMul;
    n.lhs = a.index;
    n.rhs = b.index;
    n.value = kernels::matmul(na.value, nb.value);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const auto& na = at(a);
    const auto& nb = at(b);
    TapeNode n;
    n.op = OpKind::Add;
    n.lhs = a.index;
    n.rhs = b.index;
    n.value = kernels::add(na.value, nb.value);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const auto& na = at(a);
    const auto& nb = at(b);
    TapeNode n;
    n.op = OpKind::Sub;
    n.lhs = a.index;
    n.rhs = b.index;
    n.value = kernels::sub(na.value, nb.value);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
    const auto& na = at(a);
    const auto& nb = at(b);
    TapeNode n;
    n.op = OpKind::Hadamard;
    n.lhs = a.index;
    n.rhs = b.index;
    n.value = kernels::hadamard(na.value, nb.value);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::Scale;
    n.lhs = a.index;
    n.factor = factor;
    n.value = kernels::scale(na.value, factor);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::Sigmoid;
    n.lhs = a.index;
    n.value = na.value;
    for (double& v : n.value.values()) v = sigmoid_scalar(v);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::Tanh;
    n.lhs = a.index;
    n.value = na.value;
    for (double& v : n.value.values()) v = std::tanh(v);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::blend(Var from, Var to, Var weight) {
    const auto& nf = at(from);
    const auto& nt = at(to);
    const auto& nw = at(weight);
    TapeNode n;
    n.op = OpKind::Blend;
    n.lhs = from.index;
    n.rhs = to.index;
    n.third = weight.index;
    n.value = kernels::blend(nf.value, nt.value, nw.value);
    n.requires_grad = nf.requires_grad || nt.requires_grad || nw.requires_grad;
    return push(std::move(n));
}

Var Tape::l1(Var a) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::L1;
    n.lhs = a.index;
    n.value = Matrix::scalar(kernels::l1(na.value));
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::sq_l2(Var a) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::SqL2;
    n.lhs = a.index;
    n.value = Matrix::scalar(kernels::sq_l2(na.value));
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::hconcat(Var a, Var b) {
    const auto& na = at(a);
    const auto& nb = at(b);
    if (na.value.rows() != nb.value.rows()) {
        throw DimensionError("hconcat: row mismatch " + na.value.shape_string() + " vs " +
                             nb.value.shape_string());
    }
    const std::size_t ca = na.value.cols();
    const std::size_t cb = nb.value.cols();
    Matrix out(na.value.rows(), ca + cb);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < ca; ++c) out(r, c) = na.value(r, c);
        for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = nb.value(r, c);
    }
    TapeNode n;
    n.op = OpKind::HConcat;
    n.lhs = a.index;
    n.rhs = b.index;
    n.value = std::move(out);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
    const auto& na = at(a);
    if (begin + count > na.value.cols()) {
        throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") out of " +
                             na.value.shape_string());
    }
    Matrix out(na.value.rows(), count);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < count; ++c) out(r, c) = na.value(r, begin + c);
    }
    TapeNode n;
    n.op = OpKind::SliceCols;
    n.lhs = a.index;
    n.aux = begin;
    n.value = std::move(out);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::mean_rows(Var a) {
    const auto& na = at(a);
    if (na.value.rows() == 0) throw ContractError("mean_rows: empty matrix");
    Matrix out(1, na.value.cols());
    for (std::size_t r = 0; r < na.value.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(0, c) += na.value(r, c);
    }
    const double inv = 1.0 / static_cast<double>(na.value.rows());
    for (double& v : out.values()) v *= inv;
    TapeNode n;
    n.op = OpKind::MeanRows;
    n.lhs = a.index;
    n.value = std::move(out);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::tile_columns(Var row, std::size_t cols) {
    const auto& na = at(row);
    if (na.value.rows() != 1) {
        throw DimensionError("tile_columns: expected a row vector, got " +
                             na.value.shape_string());
    }
    Matrix out(na.value.cols(), cols);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = na.value(0, i);
    }
    TapeNode n;
    n.op = OpKind::TileColumns;
    n.lhs = row.index;
    n.value = std::move(out);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::tile_rows(Var row, std::size_t rows) {
    const auto& na = at(row);
    if (na.value.rows() != 1) {
        throw DimensionError("tile_rows: expected a row vector, got " + na.value.shape_string());
    }
    Matrix out(rows, na.value.cols());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = na.value(0, j);
    }
    TapeNode n;
    n.op = OpKind::TileRows;
    n.lhs = row.index;
    n.value = std::move(out);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    const auto& na = at(a);
    TapeNode n;
    n.op = OpKind::Transpose;
    n.lhs = a.index;
    n.value = kernels::transpose(na.value);
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Gradients Tape::backward(Var root) const {
    const auto& rn = at(root);
    if (rn.value.rows() != 1 || rn.value.cols() != 1) {
        throw ContractError("backward: root must be scalar, got " + rn.value.shape_string());
    }

    std::vector<Matrix> grads(root.index + 1);
    grads[root.index] = Matrix::scalar(1.0);

    auto grad_of = [&](std::uint32_t i) -> Matrix& {
        if (grads[i].empty()) grads[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
        return grads[i];
    };
    auto wants = [&](std::uint32_t i) { return nodes_[i].requires_grad; };

    Gradients out;
    for (std::size_t idx = root.index + 1; idx-- > 0;) {
        const TapeNode& n = nodes_[idx];
        if (n.op == OpKind::Parameter) {
            auto [it, inserted] = out.try_emplace(n.aux, n.value.rows(), n.value.cols());
            if (!grads[idx].empty()) accumulate(it->second, grads[idx]);
            continue;
        }
        if (!n.requires_grad || grads[idx].empty()) continue;
        const Matrix& g = grads[idx];

        switch (n.op) {
        case OpKind::Constant:
        case OpKind::Parameter:
            break;
        case OpKind::MatMul: {
            const Matrix& a = nodes_[n.lhs].value;
            const Matrix& b = nodes_[n.rhs].value;
            if (wants(n.lhs)) kernels::matmul_nt_accumulate(g, b, grad_of(n.lhs));
            if (wants(n.rhs)) kernels::matmul_tn_accumulate(a, g, grad_of(n.rhs));
            break;
        }
        case OpKind::Add:
            if (wants(n.lhs)) accumulate(grad_of(n.lhs), g);
            if (wants(n.rhs)) accumulate(grad_of(n.rhs), g);
            break;
        case OpKind::Sub:
            if (wants(n.lhs)) accumulate(grad_of(n.lhs), g);
            if (wants(n.rhs)) {
                Matrix& gb = grad_of(n.rhs);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
            break;
        case OpKind::Hadamard: {
            const Matrix& a = nodes_[n.lhs].value;
            const Matrix& b = nodes_[n.rhs].value;
            if (wants(n.lhs)) {
                Matrix& ga = grad_of(n.lhs);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
            }
            if (wants(n.rhs)) {
                Matrix& gb = grad_of(n.rhs);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
            }
            break;
        }
        case OpKind::Scale: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.factor;
            break;
        }
        case OpKind::Sigmoid: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value[i];
                ga[i] += g[i] * y * (1.0 - y);
            }
            break;
        }
        case OpKind::Tanh: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.value[i];
                ga[i] += g[i] * (1.0 - y * y);
            }
            break;
        }
        case OpKind::L1: {
            const Matrix& a = nodes_[n.lhs].value;
            Matrix& ga = grad_of(n.lhs);
            const double s = g[0];
            // Subgradient 0 at the kink.
            for (std::size_t i = 0; i < a.size(); ++i) {
                ga[i] += a[i] > 0.0 ? s : (a[i] < 0.0 ? -s : 0.0);
            }
            break;
        }
        case OpKind::SqL2: {
            const Matrix& a = nodes_[n.lhs].value;
            Matrix& ga = grad_of(n.lhs);
            const double s = 2.0 * g[0];
            for (std::size_t i = 0; i < a.size(); ++i) ga[i] += s * a[i];
            break;
        }
        case OpKind::HConcat: {
            const std::size_t ca = nodes_[n.lhs].value.cols();
            const std::size_t cb = nodes_[n.rhs].value.cols();
            if (wants(n.lhs)) {
                Matrix& ga = grad_of(n.lhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
                }
            }
            if (wants(n.rhs)) {
                Matrix& gb = grad_of(n.rhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
                }
            }
            break;
        }
        case OpKind::SliceCols: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) ga(r, n.aux + c) += g(r, c);
            }
            break;
        }
        case OpKind::MeanRows: {
            Matrix& ga = grad_of(n.lhs);
            const double inv = 1.0 / static_cast<double>(ga.rows());
            for (std::size_t r = 0; r < ga.rows(); ++r) {
                for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) * inv;
            }
            break;
        }
        case OpKind::TileColumns: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
                ga(0, i) += s;
            }
            break;
        }
        case OpKind::TileRows: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                for (std::size_t j = 0; j < g.cols(); ++j) ga(0, j) += g(i, j);
            }
            break;
        }
        case OpKind::Blend: {
            const Matrix& from = nodes_[n.lhs].value;
            const Matrix& to = nodes_[n.rhs].value;
            const Matrix& w = nodes_[n.third].value;
            if (wants(n.lhs)) {
                Matrix& gf = grad_of(n.lhs);
                for (std::size_t i = 0; i < g.size(); ++i) gf[i] += g[i] * (1.0 - w[i]);
            }
            if (wants(n.rhs)) {
                Matrix& gt = grad_of(n.rhs);
                for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * w[i];
            }
            if (wants(n.third)) {
                Matrix& gw = grad_of(n.third);
                for (std::size_t i = 0; i < g.size(); ++i) gw[i] += g[i] * (to[i] - from[i]);
            }
            break;
        }
        case OpKind::Transpose: {
            Matrix& ga = grad_of(n.lhs);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
            }
            break;
        }
        }
    }

    // Parameters registered after the root cannot influence it.
    for (std::size_t idx = root.index + 1; idx < nodes_.size(); ++idx) {
        const TapeNode& n = nodes_[idx];
        if (n.op == OpKind::Parameter) out.try_emplace(n.aux, n.value.rows(), n.value.cols());
    }
    return out;
}

std::vector<signed char> Tape::l1_sign_pattern() const {
    std::vector<signed char> signs;
    for (const auto& n : nodes_) {
        if (n.op != OpKind::L1) continue;
        for (double v : nodes_[n.lhs].value.values()) {
            signs.push_back(static_cast<signed char>(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0)));
        }
    }
    return signs;
}

} // namespace orbitgraph
