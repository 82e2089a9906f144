#pragma once

// Test-side oracles, independent of the implementation paths they check.

#include <functional>
#include <vector>

#include "nrsfm/mat.hpp"
#include "nrsfm/svd.hpp"

namespace oracles {

/// Materialized (d (x) I3), shape (3 d.rows) x (3 d.cols).
inline nrsfm::Mat explicit_kron_i3(const nrsfm::Mat &d) {
    nrsfm::Mat k(3 * d.rows(), 3 * d.cols());
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = 0; j < d.cols(); ++j) {
            for (int r = 0; r < 3; ++r) {
                k(3 * i + r, 3 * j + r) = d(i, j);
            }
        }
    }
    return k;
}

/// (d (x) I3)^T * flat(x) computed through the explicit Kronecker matrix.
inline nrsfm::Mat explicit_kron_transpose_apply(const nrsfm::Mat &d, const nrsfm::Mat &xflat) {
    return nrsfm::matmul_tn(explicit_kron_i3(d), xflat);
}

/// Central finite differences of a scalar function of several matrices.
inline std::vector<nrsfm::Mat> finite_difference_grads(
    const std::function<double(const std::vector<nrsfm::Mat> &)> &f,
    std::vector<nrsfm::Mat> params, double h = 1e-5) {
    std::vector<nrsfm::Mat> grads;
    grads.reserve(params.size());
    for (size_t t = 0; t < params.size(); ++t) {
        nrsfm::Mat g(params[t].rows(), params[t].cols());
        for (int i = 0; i < params[t].size(); ++i) {
            const double orig = params[t].data()[i];
            params[t].data()[i] = orig + h;
            const double fp = f(params);
            params[t].data()[i] = orig - h;
            const double fm = f(params);
            params[t].data()[i] = orig;
            g.data()[i] = (fp - fm) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Max relative disagreement with the denominator floored at 1e-8.
inline double max_rel_error(const std::vector<nrsfm::Mat> &a,
                            const std::vector<nrsfm::Mat> &b) {
    double worst = 0.0;
    for (size_t t = 0; t < a.size(); ++t) {
        for (int i = 0; i < a[t].size(); ++i) {
            const double x = a[t].data()[i];
            const double y = b[t].data()[i];
            const double denom = std::max({std::fabs(x), std::fabs(y), 1e-8});
            worst = std::max(worst, std::fabs(x - y) / denom);
        }
    }
    return worst;
}

/// Brute-force support search for plain (vector) sparse coding: least
/// squares over every support of size <= s, smallest residual wins.
inline std::vector<int> best_vector_support(const nrsfm::Mat &dict, const nrsfm::Mat &x,
                                            int s) {
    const int n = dict.cols();
    std::vector<int> best;
    double best_res = nrsfm::frobenius_norm(x);
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int next) {
        if (!cur.empty()) {
            nrsfm::Mat a(dict.rows(), static_cast<int>(cur.size()));
            for (size_t c = 0; c < cur.size(); ++c) {
                for (int r = 0; r < dict.rows(); ++r) {
                    a(r, static_cast<int>(c)) = dict(r, cur[c]);
                }
            }
            nrsfm::Mat z = nrsfm::least_squares(a, x);
            const double res = nrsfm::frobenius_norm(nrsfm::sub(x, nrsfm::matmul(a, z)));
            if (res < best_res) {
                best_res = res;
                best = cur;
            }
        }
        if (static_cast<int>(cur.size()) == s) {
            return;
        }
        for (int j = next; j < n; ++j) {
            cur.push_back(j);
            rec(j + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return best;
}

} // namespace oracles
