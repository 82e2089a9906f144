#include "nrsfm/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "nrsfm/svd.hpp"

namespace nrsfm {

void IstaConfig::validate() const {
    if (!(alpha > 0.0)) {
        throw ContractError("IstaConfig: alpha must be positive");
    }
    if (tau < 0.0) {
        throw ContractError("IstaConfig: tau must be nonnegative");
    }
    for (double b : block_thresholds) {
        if (b < 0.0) {
            throw ContractError("IstaConfig: block thresholds must be nonnegative");
        }
    }
    if (max_iters < 1) {
        throw ContractError("IstaConfig: max_iters must be >= 1");
    }
    if (tol < 0.0) {
        throw ContractError("IstaConfig: tol must be nonnegative");
    }
}

double default_step_size(const Mat &dict) {
    const double sq = spectral_norm_sq(dict);
    if (sq <= 0.0) {
        throw ContractError("default_step_size: zero dictionary");
    }
    return 0.9 / sq;
}

double soft_threshold(double x, double tau) {
    if (tau < 0.0) {
        throw ContractError("soft_threshold: tau must be nonnegative");
    }
    const double mag = std::fabs(x) - tau;
    if (mag <= 0.0) {
        return 0.0;
    }
    return x >= 0.0 ? mag : -mag;
}

IstaResult ista(const Mat &dict, const Mat &x, const IstaConfig &cfg,
                std::vector<double> *objective_trace) {
    cfg.validate();
    if (x.cols() != 1 || x.rows() != dict.rows()) {
        throw ShapeError("ista: x must be a column vector with dict.rows entries");
    }
    IstaResult res;
    res.z = Mat(dict.cols(), 1);
    for (int it = 0; it < cfg.max_iters; ++it) {
        Mat resid = sub(matmul(dict, res.z), x);
        Mat grad = matmul_tn(dict, resid);
        Mat znext(dict.cols(), 1);
        double delta = 0.0;
        for (int i = 0; i < dict.cols(); ++i) {
            znext(i, 0) = soft_threshold(res.z(i, 0) - cfg.alpha * grad(i, 0), cfg.tau);
            delta = std::max(delta, std::fabs(znext(i, 0) - res.z(i, 0)));
        }
        res.z = std::move(znext);
        res.iters = it + 1;
        if (objective_trace) {
            const double fit = frobenius_norm(sub(x, matmul(dict, res.z)));
            double l1 = 0.0;
            for (int i = 0; i < dict.cols(); ++i) {
                l1 += std::fabs(res.z(i, 0));
            }
            objective_trace->push_back(0.5 * fit * fit + cfg.tau / cfg.alpha * l1);
        }
        if (delta < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

BlockMatrix block_soft_threshold_exact(const BlockMatrix &v, double tau) {
    if (tau < 0.0) {
        throw ContractError("block_soft_threshold_exact: tau must be nonnegative");
    }
    BlockMatrix out(v.block_count());
    for (int j = 0; j < v.block_count(); ++j) {
        const double norm = v.block_norm(j);
        if (norm <= tau || norm == 0.0) {
            continue; // zero block
        }
        const double f = (norm - tau) / norm;
        for (int r = 0; r < 3; ++r) {
            out.flat()(3 * j + r, 0) = f * v.flat()(3 * j + r, 0);
            out.flat()(3 * j + r, 1) = f * v.flat()(3 * j + r, 1);
        }
    }
    return out;
}

BlockMatrix block_soft_threshold_relaxed(const BlockMatrix &v,
                                         const std::vector<double> &b) {
    if (static_cast<int>(b.size()) != v.block_count()) {
        throw ShapeError("block_soft_threshold_relaxed: threshold length != block count");
    }
    BlockMatrix out(v.block_count());
    for (int j = 0; j < v.block_count(); ++j) {
        for (int r = 0; r < 3; ++r) {
            out.flat()(3 * j + r, 0) = soft_threshold(v.flat()(3 * j + r, 0), b[j]);
            out.flat()(3 * j + r, 1) = soft_threshold(v.flat()(3 * j + r, 1), b[j]);
        }
    }
    return out;
}

namespace {

// prox-consistent objective: thresholding by tau after an alpha-sized step
// descends the group penalty with weight tau/alpha
double block_objective(const Mat &dict, const Mat &x, const BlockMatrix &z, double tau,
                       double alpha) {
    const double fit = frobenius_norm(sub(x, matmul(dict, z.flat())));
    double group = 0.0;
    for (int j = 0; j < z.block_count(); ++j) {
        group += z.block_norm(j);
    }
    return 0.5 * fit * fit + tau / alpha * group;
}

} // namespace

BlockIstaResult block_ista(const Mat &dict, const Mat &x, const IstaConfig &cfg,
                           BlockThresholdMode mode,
                           std::vector<double> *objective_trace) {
    cfg.validate();
    if (dict.cols() % 3 != 0) {
        throw ShapeError("block_ista: dict column count must be a multiple of 3");
    }
    if (x.rows() != dict.rows() || x.cols() != 2) {
        throw ShapeError("block_ista: x must be dict.rows x 2");
    }
    const int k = dict.cols() / 3;
    if (mode == BlockThresholdMode::Relaxed &&
        static_cast<int>(cfg.block_thresholds.size()) != k) {
        throw ShapeError("block_ista: relaxed mode needs one threshold per block");
    }

    BlockIstaResult res;
    res.z = BlockMatrix(k);
    for (int it = 0; it < cfg.max_iters; ++it) {
        Mat resid = sub(matmul(dict, res.z.flat()), x);
        Mat grad = matmul_tn(dict, resid);
        Mat vflat(3 * k, 2);
        for (int i = 0; i < vflat.size(); ++i) {
            vflat.data()[i] = res.z.flat().data()[i] - cfg.alpha * grad.data()[i];
        }
        BlockMatrix v(std::move(vflat));
        BlockMatrix znext = mode == BlockThresholdMode::Exact
                                ? block_soft_threshold_exact(v, cfg.tau)
                                : block_soft_threshold_relaxed(v, cfg.block_thresholds);
        double delta = 0.0;
        for (int i = 0; i < znext.flat().size(); ++i) {
            delta = std::max(delta,
                             std::fabs(znext.flat().data()[i] - res.z.flat().data()[i]));
        }
        res.z = std::move(znext);
        res.iters = it + 1;
        if (objective_trace) {
            objective_trace->push_back(block_objective(dict, x, res.z, cfg.tau, cfg.alpha));
        }
        if (delta < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

namespace {

// Lexicographic enumeration of supports of size <= lambda: [], [0], [0,1], ...
void enumerate_supports(int k, int lambda, std::vector<int> &cur,
                        const std::function<void(const std::vector<int> &)> &visit,
                        int next) {
    visit(cur);
    if (static_cast<int>(cur.size()) == lambda) {
        return;
    }
    for (int j = next; j < k; ++j) {
        cur.push_back(j);
        enumerate_supports(k, lambda, cur, visit, j + 1);
        cur.pop_back();
    }
}

} // namespace

BruteForceResult brute_force_block_sparse(const Mat &dict, const Mat &x, int lambda) {
    if (dict.cols() % 3 != 0) {
        throw ShapeError("brute_force_block_sparse: dict columns must be a multiple of 3");
    }
    const int k = dict.cols() / 3;
    if (k > 16 || lambda > 3) {
        throw ContractError("brute_force_block_sparse: combinatorial bound exceeded "
                            "(needs block count <= 16 and lambda <= 3)");
    }
    if (lambda < 0) {
        throw ContractError("brute_force_block_sparse: lambda must be nonnegative");
    }
    lambda = std::min(lambda, k);

    BruteForceResult best;
    best.z = BlockMatrix(k);
    best.residual = frobenius_norm(x);

    std::vector<int> cur;
    enumerate_supports(
        k, lambda, cur,
        [&](const std::vector<int> &support) {
            if (support.empty()) {
                return; // empty support is the initial candidate
            }
            const int m = static_cast<int>(support.size());
            Mat sub_dict(dict.rows(), 3 * m);
            for (int s = 0; s < m; ++s) {
                for (int r = 0; r < dict.rows(); ++r) {
                    for (int c = 0; c < 3; ++c) {
                        sub_dict(r, 3 * s + c) = dict(r, 3 * support[s] + c);
                    }
                }
            }
            Mat zs = least_squares(sub_dict, x);
            const double resid = frobenius_norm(sub(x, matmul(sub_dict, zs)));
            if (resid < best.residual) {
                best.residual = resid;
                best.support = support;
                best.z = BlockMatrix(k);
                for (int s = 0; s < m; ++s) {
                    for (int r = 0; r < 3; ++r) {
                        best.z.flat()(3 * support[s] + r, 0) = zs(3 * s + r, 0);
                        best.z.flat()(3 * support[s] + r, 1) = zs(3 * s + r, 1);
                    }
                }
            }
        },
        0);
    return best;
}

double mutual_coherence(const Mat &dict) {
    const int n = dict.cols();
    std::vector<double> norms(n);
    for (int j = 0; j < n; ++j) {
        norms[j] = col_norm(dict, j);
        if (norms[j] == 0.0) {
            throw ContractError("mutual_coherence: zero column");
        }
    }
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = 0.0;
            for (int r = 0; r < dict.rows(); ++r) {
                d += dict(r, i) * dict(r, j);
            }
            best = std::max(best, std::fabs(d) / (norms[i] * norms[j]));
        }
    }
    return best;
}

} // namespace nrsfm
