#include "nrsfm/mat.hpp"

#include <cmath>
#include <cstring>

namespace nrsfm {

namespace {

void require_finite(const std::vector<double> &data, const char *what) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw ContractError(std::string(what) + ": non-finite entry");
        }
    }
}

} // namespace

Mat::Mat(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) {
        throw ShapeError("Mat: negative dimension");
    }
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

Mat::Mat(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) {
        throw ShapeError("Mat: negative dimension");
    }
    if (data.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeError("Mat: data length does not match rows*cols");
    }
    require_finite(data, "Mat");
    data_ = std::move(data);
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto &r : rows) {
        if (static_cast<int>(r.size()) != cols_) {
            throw ShapeError("Mat: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(data_, "Mat");
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Mat Mat::reshaped(int rows, int cols) const {
    if (rows * cols != size()) {
        throw ShapeError("reshaped: element count mismatch");
    }
    Mat out;
    out.rows_ = rows;
    out.cols_ = cols;
    out.data_ = data_;
    return out;
}

BlockMatrix::BlockMatrix(Mat flat) : flat_(std::move(flat)) {
    if (flat_.cols() != 2 || flat_.rows() % 3 != 0) {
        throw ShapeError("BlockMatrix: flat form must be (3k) x 2");
    }
}

Mat BlockMatrix::block(int j) const {
    Mat b(3, 2);
    for (int r = 0; r < 3; ++r) {
        b(r, 0) = flat_(3 * j + r, 0);
        b(r, 1) = flat_(3 * j + r, 1);
    }
    return b;
}

void BlockMatrix::set_block(int j, const Mat &b) {
    if (b.rows() != 3 || b.cols() != 2) {
        throw ShapeError("set_block: block must be 3x2");
    }
    for (int r = 0; r < 3; ++r) {
        flat_(3 * j + r, 0) = b(r, 0);
        flat_(3 * j + r, 1) = b(r, 1);
    }
}

double BlockMatrix::block_norm(int j) const {
    double s = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 2; ++c) {
            double v = flat_(3 * j + r, c);
            s += v * v;
        }
    }
    return std::sqrt(s);
}

Mat matmul(const Mat &a, const Mat &b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ");
    }
    Mat c(a.rows(), b.cols());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int q = 0; q < k; ++q) {
                s += a(i, q) * b(q, j);
            }
            c(i, j) = s;
        }
    }
    return c;
}

Mat matmul_tn(const Mat &a, const Mat &b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: inner dimensions differ");
    }
    Mat c(a.cols(), b.cols());
    const int m = a.cols(), k = a.rows(), n = b.cols();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int q = 0; q < k; ++q) {
                s += a(q, i) * b(q, j);
            }
            c(i, j) = s;
        }
    }
    return c;
}

Mat matmul_nt(const Mat &a, const Mat &b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ");
    }
    Mat c(a.rows(), b.rows());
    const int m = a.rows(), k = a.cols(), n = b.rows();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int q = 0; q < k; ++q) {
                s += a(i, q) * b(j, q);
            }
            c(i, j) = s;
        }
    }
    return c;
}

Mat transpose(const Mat &a) {
    Mat t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

Mat add(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch");
    }
    Mat c(a.rows(), a.cols());
    for (int i = 0; i < a.size(); ++i) {
        c.data()[i] = a.data()[i] + b.data()[i];
    }
    return c;
}

Mat sub(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        throw ShapeError("sub: shape mismatch");
    }
    Mat c(a.rows(), a.cols());
    for (int i = 0; i < a.size(); ++i) {
        c.data()[i] = a.data()[i] - b.data()[i];
    }
    return c;
}

Mat scale(const Mat &a, double s) {
    Mat c(a.rows(), a.cols());
    for (int i = 0; i < a.size(); ++i) {
        c.data()[i] = a.data()[i] * s;
    }
    return c;
}

Mat hadamard(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        throw ShapeError("hadamard: shape mismatch");
    }
    Mat c(a.rows(), a.cols());
    for (int i = 0; i < a.size(); ++i) {
        c.data()[i] = a.data()[i] * b.data()[i];
    }
    return c;
}

double frobenius_norm(const Mat &a) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        s += a.data()[i] * a.data()[i];
    }
    return std::sqrt(s);
}

double max_abs(const Mat &a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a.data()[i]));
    }
    return m;
}

double dot(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        throw ShapeError("dot: shape mismatch");
    }
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        s += a.data()[i] * b.data()[i];
    }
    return s;
}

double col_norm(const Mat &a, int c) {
    double s = 0.0;
    for (int r = 0; r < a.rows(); ++r) {
        s += a(r, c) * a(r, c);
    }
    return std::sqrt(s);
}

bool all_finite(const Mat &a) {
    for (int i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a.data()[i])) {
            return false;
        }
    }
    return true;
}

bool bitwise_equal(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        return false;
    }
    return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

Mat dai_reshape_to_d1(const Mat &d1_sharp) {
    if (d1_sharp.cols() % 3 != 0) {
        throw ShapeError("dai_reshape_to_d1: columns must be a multiple of 3");
    }
    const int p = d1_sharp.rows();
    const int k = d1_sharp.cols() / 3;
    Mat d1(3 * p, k);
    for (int l = 0; l < p; ++l) {
        for (int j = 0; j < k; ++j) {
            for (int c = 0; c < 3; ++c) {
                d1(3 * l + c, j) = d1_sharp(l, 3 * j + c);
            }
        }
    }
    return d1;
}

Mat dai_reshape_to_sharp(const Mat &d1, int p) {
    if (p <= 0 || d1.rows() != 3 * p) {
        throw ShapeError("dai_reshape_to_sharp: rows must equal 3p");
    }
    const int k = d1.cols();
    Mat sharp(p, 3 * k);
    for (int l = 0; l < p; ++l) {
        for (int j = 0; j < k; ++j) {
            for (int c = 0; c < 3; ++c) {
                sharp(l, 3 * j + c) = d1(3 * l + c, j);
            }
        }
    }
    return sharp;
}

BlockMatrix kron_identity_transpose_apply(const Mat &d, const BlockMatrix &x) {
    if (x.block_count() != d.rows()) {
        throw ShapeError("kron_identity_transpose_apply: block count != d.rows");
    }
    const int k_in = d.rows();
    const int k_out = d.cols();
    BlockMatrix out(k_out);
    const Mat &xf = x.flat();
    Mat &of = out.flat();
    for (int j = 0; j < k_out; ++j) {
        for (int r = 0; r < 3; ++r) {
            double s0 = 0.0, s1 = 0.0;
            for (int i = 0; i < k_in; ++i) {
                const double w = d(i, j);
                s0 += w * xf(3 * i + r, 0);
                s1 += w * xf(3 * i + r, 1);
            }
            of(3 * j + r, 0) = s0;
            of(3 * j + r, 1) = s1;
        }
    }
    return out;
}

} // namespace nrsfm
