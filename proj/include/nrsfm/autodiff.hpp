#pragma once

#include <vector>

#include "nrsfm/mat.hpp"

namespace nrsfm {

/// Handle to a recorded node; valid only for the tape that created it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Append-only record of forward operations over dense matrices. Nodes are
/// in topological order by construction; one backward sweep visits each node
/// exactly once, in reverse id order, so gradients are deterministic.
///
/// The operation set is fixed: the six differentiable primitives the model
/// needs (matmul, kron-apply, bias-subtract + ReLU, blockwise combination,
/// orthonormal projection of a 3x2 matrix, Frobenius norm) plus structural
/// reshapes and scalar square/sub plumbing.
class Tape {
  public:
    Var input(Mat value);

    /// op(a) * op(b); at most one side transposed.
    Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

    /// d: k_in x k_out dictionary, x: flat (3 k_in) x 2 -> flat (3 k_out) x 2,
    /// output block j = sum_i d(i,j) * input block i.
    Var kron_apply(Var d, Var x);

    /// relu(x - b (x) 1_{3x2}) with one threshold per 3x2 block; x is a flat
    /// (3k) x 2 code, b is k x 1. Subgradient at 0 is 0.
    Var relu_bias_block(Var x, Var b);

    /// relu(x - b) with b the same shape as x.
    Var relu_bias_elem(Var x, Var b);

    /// sum_j c(j) * block_j(x) for a flat (3k) x 2 code and c: k x 1 -> 3x2.
    Var block_combine(Var x, Var c);

    /// Nearest semi-orthonormal 3x2 matrix (polar factor). Backward is the
    /// analytic polar derivative through the closed-form Gram
    /// eigendecomposition. Throws DegenerateCameraError below the threshold.
    Var orthonormalize_3x2(Var m);

    Var sub(Var a, Var b);
    Var frobenius_norm(Var x); // 1x1 result
    Var square(Var x);         // elementwise

    /// Row-major reinterpret; gradient is the inverse reshape.
    Var reshape(Var x, int rows, int cols);

    /// Dai-style reshape of D1# (p x 3k) into D1 (3p x k):
    /// D1(3l + c, j) = D1#(l, 3j + c).
    Var dai_reshape(Var d1_sharp);

    const Mat &value(Var v) const;
    size_t node_count() const { return nodes_.size(); }

    /// dLoss/dVar for each wrt var; loss must be scalar-shaped. Vars that do
    /// not influence the loss get a zero matrix of their shape.
    std::vector<Mat> grad(Var loss, const std::vector<Var> &wrt) const;

  private:
    enum class Op {
        Input,
        MatMul,
        KronApply,
        ReluBiasBlock,
        ReluBiasElem,
        BlockCombine,
        Orthonormalize,
        Sub,
        FrobeniusNorm,
        Square,
        Reshape,
        DaiReshape,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        bool ta = false;
        bool tb = false;
        Mat value;
    };

    Var push(Node n);
    const Node &node(Var v) const;
    void backward_into(const Node &n, const Mat &gbar, std::vector<Mat> &adj) const;

    std::vector<Node> nodes_;
};

} // namespace nrsfm
