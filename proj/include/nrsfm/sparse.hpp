#pragma once

#include <vector>

#include "nrsfm/mat.hpp"

namespace nrsfm {

/// Step size, thresholds and stopping rule for the ISTA family.
struct IstaConfig {
    double alpha = 0.0;                    // > 0; see default_step_size
    double tau = 0.0;                      // scalar threshold (exact block mode, plain ISTA)
    std::vector<double> block_thresholds;  // per-block b (relaxed mode)
    int max_iters = 1000;
    double tol = 1e-10;                    // inf-norm fixed-point residual

    void validate() const;
};

/// 0.9 / ||dict||_2^2, the guaranteed-descent default.
double default_step_size(const Mat &dict);

/// sign(x) * max(|x| - tau, 0)
double soft_threshold(double x, double tau);

enum class BlockThresholdMode { Exact, Relaxed };

struct IstaResult {
    Mat z;
    int iters = 0;
    bool converged = false;
};

/// Plain vector ISTA from z0 = 0:
///   z <- h_tau(z - alpha * W^T (W z - x)).
/// Thresholding by tau after a step of size alpha is the proximal step for
/// the penalty weight tau/alpha, so `objective_trace` records
/// 0.5||x - Wz||^2 + (tau/alpha) ||z||_1, the quantity the iteration
/// actually descends when alpha <= 1/||W||_2^2.
IstaResult ista(const Mat &dict, const Mat &x, const IstaConfig &cfg,
                std::vector<double> *objective_trace = nullptr);

/// Per-block shrinkage: block j is zeroed if ||V_j||_F <= tau, else scaled
/// by (||V_j||_F - tau) / ||V_j||_F.
BlockMatrix block_soft_threshold_exact(const BlockMatrix &v, double tau);

/// Elementwise soft threshold within block j using b[j].
BlockMatrix block_soft_threshold_relaxed(const BlockMatrix &v,
                                         const std::vector<double> &b);

struct BlockIstaResult {
    BlockMatrix z;
    int iters = 0;
    bool converged = false;
};

/// Block ISTA from Z0 = 0: V = Z - alpha W^T (W Z - X), then the exact or
/// relaxed block threshold. dict is the flat (p x 3k) dictionary.
BlockIstaResult block_ista(const Mat &dict, const Mat &x, const IstaConfig &cfg,
                           BlockThresholdMode mode,
                           std::vector<double> *objective_trace = nullptr);

struct BruteForceResult {
    BlockMatrix z;
    std::vector<int> support;
    double residual = 0.0;
};

/// Global minimizer of ||X - dict Z||_F over all block supports of size
/// <= lambda (least squares per support). Ties go to the lexicographically
/// smallest support. Refuses more than 16 blocks or lambda > 3.
BruteForceResult brute_force_block_sparse(const Mat &dict, const Mat &x, int lambda);

/// max_{i != j} |d_i . d_j| / (||d_i|| ||d_j||); zero columns are rejected.
double mutual_coherence(const Mat &dict);

} // namespace nrsfm
