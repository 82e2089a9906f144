#pragma once

#include <initializer_list>
#include <vector>

#include "nrsfm/errors.hpp"

namespace nrsfm {

/// Dense real matrix, row-major, 64-bit floats throughout.
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols); // zero-filled
    Mat(int rows, int cols, std::vector<double> data);
    Mat(std::initializer_list<std::initializer_list<double>> rows);

    static Mat identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double &operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double *data() { return data_.data(); }
    const double *data() const { return data_.data(); }

    /// Row-major reinterpretation with the same element count.
    Mat reshaped(int rows, int cols) const;
    bool same_shape(const Mat &other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// A (3k) x 2 matrix viewed as k stacked 3x2 blocks. Block j occupies
/// flat rows 3j .. 3j+2.
class BlockMatrix {
  public:
    BlockMatrix() = default;
    explicit BlockMatrix(int k) : flat_(3 * k, 2) {}
    explicit BlockMatrix(Mat flat);

    int block_count() const { return flat_.rows() / 3; }
    const Mat &flat() const { return flat_; }
    Mat &flat() { return flat_; }

    Mat block(int j) const;
    void set_block(int j, const Mat &b);
    double block_norm(int j) const; // Frobenius norm of block j

  private:
    Mat flat_;
};

// ---------------------------------------------------------------------------
// Products and elementwise operations
// ---------------------------------------------------------------------------

Mat matmul(const Mat &a, const Mat &b);
Mat matmul_tn(const Mat &a, const Mat &b); // a^T * b
Mat matmul_nt(const Mat &a, const Mat &b); // a * b^T

Mat transpose(const Mat &a);
Mat add(const Mat &a, const Mat &b);
Mat sub(const Mat &a, const Mat &b);
Mat scale(const Mat &a, double s);
Mat hadamard(const Mat &a, const Mat &b);

double frobenius_norm(const Mat &a);
double max_abs(const Mat &a);
double dot(const Mat &a, const Mat &b); // Frobenius inner product
double col_norm(const Mat &a, int c);

bool all_finite(const Mat &a);
bool bitwise_equal(const Mat &a, const Mat &b);

/// Blockwise application of (d (x) I3)^T to the flat form of x, computed
/// without materializing the Kronecker product: output block j is
/// sum_i d(i,j) * input block i.
BlockMatrix kron_identity_transpose_apply(const Mat &d, const BlockMatrix &x);

/// Dai-style reshape between D1 (3p x k) and D1# (p x 3k):
/// D1(3l + c, j) = D1#(l, 3j + c). The round trip is exact.
Mat dai_reshape_to_d1(const Mat &d1_sharp);
Mat dai_reshape_to_sharp(const Mat &d1, int p);

} // namespace nrsfm
