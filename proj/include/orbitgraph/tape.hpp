#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "orbitgraph/matrix.hpp"

namespace orbitgraph {

using ParamId = std::size_t;

// dLoss/dParam for every parameter leaf registered on a tape.
using Gradients = std::map<ParamId, Matrix>;

// Handle to a node on a Tape. Only meaningful for the tape that created it.
struct Var {
    std::uint32_t index = UINT32_MAX;
    bool valid() const noexcept { return index != UINT32_MAX; }
};

enum class OpKind : std::uint8_t {
    Constant,
    Parameter,
    MatMul,
    Add,
    Sub,
    Hadamard,
    Scale,
    Sigmoid,
    Tanh,
    L1,
    SqL2,
    HConcat,
    SliceCols,
    MeanRows,
    TileColumns,
    TileRows,
    Transpose,
    Blend,
};

struct TapeNode {
    OpKind op = OpKind::Constant;
    std::uint32_t lhs = UINT32_MAX;
    std::uint32_t rhs = UINT32_MAX;
    std::uint32_t third = UINT32_MAX;  // Blend weight
    Matrix value;
    double factor = 0.0;     // Scale
    std::size_t aux = 0;     // SliceCols begin, Parameter id
    bool requires_grad = false;
};

/**
 * Reverse-mode differentiation tape over dense matrices.
 *
 * Every operation is evaluated eagerly and appended; a node's inputs always
 * precede it, so the node list is already in topological order and the
 * backward sweep is a single reverse pass. Shapes never broadcast: the only
 * implicit scalar is the factor of `scale`, everything else goes through the
 * explicit tile/mean operations.
 */
class Tape {
public:
    Tape() = default;

    Var constant(Matrix m);
    Var parameter(Matrix m, ParamId id);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double factor);
    Var sigmoid(Var a);
    Var tanh(Var a);
    // Entrywise from + weight o (to - from), clamped to [min, max] of the ends.
    Var blend(Var from, Var to, Var weight);

    // Scalar (1x1) reductions.
    Var l1(Var a);
    Var sq_l2(Var a);

    Var hconcat(Var a, Var b);
    Var slice_cols(Var a, std::size_t begin, std::size_t count);
    // [N x d] -> [1 x d] column means.
    Var mean_rows(Var a);
    // [1 x d] -> [d x cols], every column a copy of the transposed row.
    Var tile_columns(Var row, std::size_t cols);
    // [1 x c] -> [rows x c].
    Var tile_rows(Var row, std::size_t rows);
    Var transpose(Var a);

    const Matrix& value(Var v) const;
    double scalar(Var v) const { return value(v).item(); }
    std::size_t size() const noexcept { return nodes_.size(); }
    const TapeNode& node(Var v) const;

    // Reverse accumulation from a 1x1 root. Throws ContractError otherwise.
    Gradients backward(Var root) const;

    // Signs (-1/0/+1) of every entry fed to an l1 node, in tape order. Two
    // evaluations with equal patterns lie on the same smooth piece of the loss.
    std::vector<signed char> l1_sign_pattern() const;

private:
    Var push(TapeNode node);
    const TapeNode& at(Var v) const;

    std::vector<TapeNode> nodes_;
};

} // namespace orbitgraph
