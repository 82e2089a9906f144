#include "doctest.h"

#include "nrsfm/rng.hpp"
#include "nrsfm/sparse.hpp"
#include "nrsfm/svd.hpp"
#include "oracles.hpp"

using namespace nrsfm;

namespace {

// Unit-column dictionary.
Mat normalized_dict(int rows, int cols, Rng &rng) {
    Mat d = random_gaussian(rows, cols, rng);
    for (int j = 0; j < cols; ++j) {
        const double n = col_norm(d, j);
        for (int r = 0; r < rows; ++r) {
            d(r, j) /= n;
        }
    }
    return d;
}

// Dictionary whose 3k flat columns are orthonormal (needs rows >= 3k).
Mat orthonormal_block_dict(int rows, int k, Rng &rng) {
    Mat g = random_gaussian(rows, 3 * k, rng);
    return qr_thin(g).q;
}

} // namespace

TEST_CASE("soft threshold definition") {
    CHECK(soft_threshold(1.2, 0.5) == doctest::Approx(0.7));
    CHECK(soft_threshold(-0.3, 0.5) == 0.0);
    CHECK(soft_threshold(-1.2, 0.5) == doctest::Approx(-0.7));
    CHECK(soft_threshold(3.25, 0.0) == 3.25);
    CHECK_THROWS_AS(soft_threshold(1.0, -0.1), ContractError);
}

TEST_CASE("ista with identity dictionary converges immediately to h_tau(x)") {
    Rng rng(1);
    Mat x = random_gaussian(6, 1, rng);
    IstaConfig cfg;
    cfg.alpha = 1.0;
    cfg.tau = 0.4;
    IstaResult res = ista(Mat::identity(6), x, cfg);
    CHECK(res.converged);
    for (int i = 0; i < 6; ++i) {
        CHECK(res.z(i, 0) == doctest::Approx(soft_threshold(x(i, 0), 0.4)).epsilon(1e-12));
    }
}

TEST_CASE("ista of zero input returns zero") {
    Rng rng(2);
    Mat dict = random_gaussian(4, 6, rng);
    IstaConfig cfg;
    cfg.alpha = default_step_size(dict);
    cfg.tau = 0.1;
    IstaResult res = ista(dict, Mat(4, 1), cfg);
    CHECK(res.converged);
    CHECK(max_abs(res.z) == 0.0);
}

TEST_CASE("ista recovers a planted 2-sparse support") {
    Rng rng(12);
    Mat dict = normalized_dict(8, 12, rng);
    Mat z_true(12, 1);
    z_true(3, 0) = 1.2;
    z_true(9, 0) = -0.9;
    Mat x = matmul(dict, z_true);
    Mat noise = random_gaussian(8, 1, rng, 0.005);
    x = add(x, noise);

    IstaConfig cfg;
    cfg.alpha = default_step_size(dict);
    cfg.tau = 0.02;
    cfg.max_iters = 5000;
    cfg.tol = 1e-12;
    IstaResult res = ista(dict, x, cfg);

    std::vector<int> support;
    for (int i = 0; i < 12; ++i) {
        if (res.z(i, 0) != 0.0) {
            support.push_back(i);
        }
    }
    CHECK(support == std::vector<int>{3, 9});
    CHECK(support == oracles::best_vector_support(dict, x, 2));
}

TEST_CASE("ista objective is non-increasing for a safe step size") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 40);
        Mat dict = random_gaussian(6, 10, rng);
        Mat x = random_gaussian(6, 1, rng);
        IstaConfig cfg;
        cfg.alpha = default_step_size(dict);
        cfg.tau = 0.1;
        cfg.max_iters = 50;
        std::vector<double> trace;
        ista(dict, x, cfg, &trace);
        for (size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("exact block threshold scales norms through h_tau") {
    BlockMatrix v(1);
    v.set_block(0, Mat{{3, 0}, {0, 4}, {0, 0}}); // Frobenius norm 5
    BlockMatrix out = block_soft_threshold_exact(v, 1.0);
    CHECK(max_abs(sub(out.block(0), Mat{{2.4, 0}, {0, 3.2}, {0, 0}})) < 1e-12);

    BlockMatrix small(1);
    small.set_block(0, Mat{{0.3, 0}, {0, 0.4}, {0, 0}}); // norm 0.5
    CHECK(max_abs(block_soft_threshold_exact(small, 1.0).flat()) == 0.0);

    Rng rng(3);
    BlockMatrix any(3);
    any.flat() = random_gaussian(9, 2, rng);
    CHECK(bitwise_equal(block_soft_threshold_exact(any, 0.0).flat(), any.flat()));
}

TEST_CASE("exact block threshold: output norms equal h_tau of input norms") {
    Rng rng(8);
    BlockMatrix v(5);
    v.flat() = random_gaussian(15, 2, rng);
    const double tau = 0.8;
    BlockMatrix out = block_soft_threshold_exact(v, tau);
    for (int j = 0; j < 5; ++j) {
        CHECK(out.block_norm(j) ==
              doctest::Approx(soft_threshold(v.block_norm(j), tau)).epsilon(1e-12));
    }
}

TEST_CASE("relaxed block threshold applies per-block elementwise shrinkage") {
    Rng rng(4);
    BlockMatrix v(3);
    v.flat() = random_gaussian(9, 2, rng);

    BlockMatrix same = block_soft_threshold_relaxed(v, {0.0, 0.0, 0.0});
    CHECK(bitwise_equal(same.flat(), v.flat()));

    BlockMatrix out = block_soft_threshold_relaxed(v, {0.2, 10.0, 0.4});
    CHECK(max_abs(out.block(1)) == 0.0); // everything below b_1 in magnitude
    for (int j : {0, 2}) {
        const double b = j == 0 ? 0.2 : 0.4;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                CHECK(out.block(j)(r, c) == soft_threshold(v.block(j)(r, c), b));
            }
        }
    }
    CHECK_THROWS_AS(block_soft_threshold_relaxed(v, {0.1}), ShapeError);
}

TEST_CASE("relaxed and exact thresholds zero the same symmetric blocks") {
    // when every entry of a block shares one magnitude, the Frobenius norm is
    // sqrt(6) * mag, so the dead zones can be matched
    BlockMatrix v(2);
    Mat b0(3, 2), b1(3, 2);
    for (int i = 0; i < 6; ++i) {
        b0.data()[i] = (i % 2 ? -0.2 : 0.2);
        b1.data()[i] = (i % 2 ? 1.1 : -1.1);
    }
    v.set_block(0, b0);
    v.set_block(1, b1);
    const double mag0 = 0.2, mag1 = 1.1;
    const double tau = 1.0; // between the two block norms
    BlockMatrix exact = block_soft_threshold_exact(v, tau);
    BlockMatrix relaxed =
        block_soft_threshold_relaxed(v, {tau / std::sqrt(6.0), tau / std::sqrt(6.0)});
    CHECK(mag0 * std::sqrt(6.0) < tau);
    CHECK(mag1 * std::sqrt(6.0) > tau);
    for (int j = 0; j < 2; ++j) {
        const bool exact_zero = max_abs(exact.block(j)) == 0.0;
        const bool relaxed_zero = max_abs(relaxed.block(j)) == 0.0;
        CHECK(exact_zero == relaxed_zero);
    }
}

TEST_CASE("block ista with identity dictionary thresholds X in one step") {
    Rng rng(5);
    Mat x = random_gaussian(6, 2, rng);
    IstaConfig cfg;
    cfg.alpha = 1.0;
    cfg.tau = 0.3;
    BlockIstaResult res = block_ista(Mat::identity(6), x, cfg, BlockThresholdMode::Exact);
    CHECK(res.converged);
    BlockMatrix want = block_soft_threshold_exact(BlockMatrix(x), 0.3);
    CHECK(max_abs(sub(res.z.flat(), want.flat())) < 1e-12);
}

TEST_CASE("block ista recovers a planted block support") {
    int hits = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        const int k = 6;
        Mat dict = orthonormal_block_dict(24, k, rng);
        BlockMatrix z_true(k);
        z_true.set_block(2, random_gaussian(3, 2, rng));
        Mat x = matmul(dict, z_true.flat());

        IstaConfig cfg;
        cfg.alpha = default_step_size(dict);
        cfg.tau = 0.3 * z_true.block_norm(2);
        cfg.max_iters = 2000;
        BlockIstaResult res = block_ista(dict, x, cfg, BlockThresholdMode::Exact);
        bool ok = true;
        for (int j = 0; j < k; ++j) {
            const bool active = res.z.block_norm(j) > 1e-9;
            if (active != (j == 2)) {
                ok = false;
            }
        }
        hits += ok ? 1 : 0;

        BruteForceResult bf = brute_force_block_sparse(dict, x, 1);
        CHECK(bf.support == std::vector<int>{2});
        const double ista_res = frobenius_norm(sub(x, matmul(dict, res.z.flat())));
        CHECK(bf.residual <= ista_res + 1e-9);
    }
    CHECK(hits == 20);
}

TEST_CASE("block ista objective is non-increasing in exact mode") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 60);
        Mat dict = random_gaussian(10, 12, rng);
        Mat x = random_gaussian(10, 2, rng);
        IstaConfig cfg;
        cfg.alpha = default_step_size(dict);
        cfg.tau = 0.2;
        cfg.max_iters = 60;
        std::vector<double> trace;
        block_ista(dict, x, cfg, BlockThresholdMode::Exact, &trace);
        for (size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("single relaxed iteration with alpha=1 equals the ReLU layer bitwise") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 7);
        const int p = 9, k = 4;
        // nonnegative-producing input: W and X entrywise nonnegative
        Mat dict = random_gaussian(p, 3 * k, rng);
        Mat x = random_gaussian(p, 2, rng);
        for (int i = 0; i < dict.size(); ++i) {
            dict.data()[i] = std::fabs(dict.data()[i]);
        }
        for (int i = 0; i < x.size(); ++i) {
            x.data()[i] = std::fabs(x.data()[i]);
        }
        std::vector<double> b = {0.05, 0.3, 0.0, 0.7};

        IstaConfig cfg;
        cfg.alpha = 1.0;
        cfg.block_thresholds = b;
        cfg.max_iters = 1;
        BlockIstaResult res = block_ista(dict, x, cfg, BlockThresholdMode::Relaxed);

        // the feed-forward layer: relu(W^T X - b (x) 1_{3x2})
        Mat pre = matmul_tn(dict, x);
        Mat relu(3 * k, 2);
        for (int r = 0; r < 3 * k; ++r) {
            for (int c = 0; c < 2; ++c) {
                relu(r, c) = std::max(pre(r, c) - b[r / 3], 0.0);
            }
        }
        CHECK(bitwise_equal(res.z.flat(), relu));
    }
}

TEST_CASE("brute force: exactly representable input gives zero residual") {
    Rng rng(9);
    Mat dict = orthonormal_block_dict(18, 5, rng);
    BlockMatrix z_true(5);
    z_true.set_block(1, random_gaussian(3, 2, rng));
    Mat x = matmul(dict, z_true.flat());
    BruteForceResult bf = brute_force_block_sparse(dict, x, 1);
    CHECK(bf.residual < 1e-10);
    CHECK(bf.support == std::vector<int>{1});
}

TEST_CASE("brute force with full support equals ordinary least squares") {
    Rng rng(10);
    Mat dict = random_gaussian(12, 9, rng); // 3 blocks
    Mat x = random_gaussian(12, 2, rng);
    BruteForceResult bf = brute_force_block_sparse(dict, x, 3);
    Mat z_ls = least_squares(dict, x);
    const double res_ls = frobenius_norm(sub(x, matmul(dict, z_ls)));
    CHECK(bf.residual == doctest::Approx(res_ls).epsilon(1e-10));
}

TEST_CASE("brute force dominates the heuristic on random instances") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 200);
        Mat dict = random_gaussian(15, 12, rng); // 4 blocks
        Mat x = random_gaussian(15, 2, rng);
        IstaConfig cfg;
        cfg.alpha = default_step_size(dict);
        cfg.tau = 0.5;
        cfg.max_iters = 500;
        BlockIstaResult heur = block_ista(dict, x, cfg, BlockThresholdMode::Exact);
        int active = 0;
        for (int j = 0; j < 4; ++j) {
            active += heur.z.block_norm(j) > 0.0 ? 1 : 0;
        }
        if (active > 3) {
            continue; // oracle bound only covers supports of size <= 3
        }
        BruteForceResult bf = brute_force_block_sparse(dict, x, std::max(active, 1));
        const double heur_res = frobenius_norm(sub(x, matmul(dict, heur.z.flat())));
        CHECK(bf.residual <= heur_res + 1e-9);
    }
}

TEST_CASE("brute force refuses oversized instances") {
    CHECK_THROWS_AS(brute_force_block_sparse(Mat(4, 3 * 17), Mat(4, 2), 1), ContractError);
    CHECK_THROWS_AS(brute_force_block_sparse(Mat(4, 6), Mat(4, 2), 4), ContractError);
}

TEST_CASE("mutual coherence basics") {
    CHECK(mutual_coherence(Mat::identity(5)) == 0.0);

    Mat dup(4, 3);
    Rng rng(11);
    Mat col = random_gaussian(4, 1, rng);
    for (int r = 0; r < 4; ++r) {
        dup(r, 0) = col(r, 0);
        dup(r, 1) = col(r, 0);
        dup(r, 2) = r == 0 ? 1.0 : 0.0;
    }
    CHECK(mutual_coherence(dup) == doctest::Approx(1.0).epsilon(1e-12));

    Mat pair{{1.0, std::sqrt(0.5)}, {0.0, std::sqrt(0.5)}};
    CHECK(mutual_coherence(pair) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    Mat with_zero(3, 2);
    with_zero(0, 0) = 1.0;
    CHECK_THROWS_AS(mutual_coherence(with_zero), ContractError);
}

TEST_CASE("ista config validation") {
    IstaConfig bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad.alpha = 0.1;
    bad.max_iters = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
