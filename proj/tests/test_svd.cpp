#include "doctest.h"

#include "nrsfm/errors.hpp"
#include "nrsfm/rng.hpp"
#include "nrsfm/svd.hpp"

using namespace nrsfm;

namespace {

Mat reconstruct(const SvdResult &s) {
    Mat us = s.u;
    for (int j = 0; j < us.cols(); ++j) {
        for (int r = 0; r < us.rows(); ++r) {
            us(r, j) *= s.sigma[j];
        }
    }
    return matmul_nt(us, s.v);
}

double orthonormality_defect(const Mat &q) {
    return max_abs(sub(matmul_tn(q, q), Mat::identity(q.cols())));
}

} // namespace

TEST_CASE("svd of padded diagonal") {
    Mat m{{3, 0}, {0, 2}, {0, 0}};
    SvdResult s = svd_thin(m);
    CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(s.sigma[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(max_abs(sub(reconstruct(s), m)) < 1e-12);
}

TEST_CASE("svd of a semi-orthonormal 3x2 gives unit singular values") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        Mat m = random_semiorthonormal_3x2(rng);
        SvdResult s = svd_thin(m);
        CHECK(std::fabs(s.sigma[0] - 1.0) < 1e-10);
        CHECK(std::fabs(s.sigma[1] - 1.0) < 1e-10);
    }
}

TEST_CASE("svd reconstructs random 3x2 inputs") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        Mat m = random_gaussian(3, 2, rng);
        SvdResult s = svd_thin(m);
        CHECK(orthonormality_defect(s.u) < 1e-10);
        CHECK(orthonormality_defect(s.v) < 1e-10);
        CHECK(s.sigma[0] >= s.sigma[1]);
        CHECK(s.sigma[1] >= 0.0);
        CHECK(max_abs(sub(reconstruct(s), m)) <= 1e-9 * std::max(max_abs(m), 1.0));
    }
}

TEST_CASE("svd handles rank-deficient two-column input") {
    Mat m(4, 2);
    for (int r = 0; r < 4; ++r) {
        m(r, 0) = r + 1.0;
        m(r, 1) = 2.0 * (r + 1.0); // parallel columns
    }
    SvdResult s = svd_thin(m);
    CHECK(s.sigma[1] < 1e-12 * s.sigma[0]);
    CHECK(orthonormality_defect(s.u) < 1e-10);
    CHECK(max_abs(sub(reconstruct(s), m)) < 1e-9 * max_abs(m));
}

TEST_CASE("jacobi svd on wider random matrices") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 1000);
        const int cols = 3 + static_cast<int>(rng.index(6));
        const int rows = cols + static_cast<int>(rng.index(10));
        Mat m = random_gaussian(rows, cols, rng);
        SvdResult s = svd_thin(m);
        CHECK(orthonormality_defect(s.u) < 1e-10);
        CHECK(orthonormality_defect(s.v) < 1e-10);
        for (size_t i = 1; i < s.sigma.size(); ++i) {
            CHECK(s.sigma[i - 1] >= s.sigma[i]);
        }
        CHECK(max_abs(sub(reconstruct(s), m)) <= 1e-9 * max_abs(m));
    }
}

TEST_CASE("svd rejects wide inputs") {
    CHECK_THROWS_AS(svd_thin(Mat(2, 3)), ShapeError);
}

TEST_CASE("qr produces orthonormal q and nonnegative diagonal") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        Mat m = random_gaussian(6, 4, rng);
        QrResult qr = qr_thin(m);
        CHECK(orthonormality_defect(qr.q) < 1e-12);
        for (int j = 0; j < 4; ++j) {
            CHECK(qr.r(j, j) >= 0.0);
        }
        CHECK(max_abs(sub(matmul(qr.q, qr.r), m)) < 1e-12 * std::max(1.0, max_abs(m)));
    }
}

TEST_CASE("polar projection is the identity on isometries") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Mat m = random_semiorthonormal_3x2(rng);
        Mat q = orthonormal_polar_3x2(m);
        CHECK(max_abs(sub(q, m)) < 1e-12);
    }
}

TEST_CASE("polar projection of padded diagonal") {
    Mat m{{2, 0}, {0, 3}, {0, 0}};
    Mat q = orthonormal_polar_3x2(m);
    Mat expect{{1, 0}, {0, 1}, {0, 0}};
    CHECK(max_abs(sub(q, expect)) < 1e-12);
}

TEST_CASE("polar projection is idempotent") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 77);
        Mat m = random_gaussian(3, 2, rng);
        if (polar_is_degenerate(m)) {
            continue;
        }
        Mat q1 = orthonormal_polar_3x2(m);
        Mat q2 = orthonormal_polar_3x2(q1);
        CHECK(max_abs(sub(q1, q2)) < 1e-12);
    }
}

TEST_CASE("polar projection stays orthonormal near the degeneracy threshold") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        Mat m = random_semiorthonormal_3x2(rng);
        // squeeze the second direction close to (but above) the threshold
        const double squeeze = 2e-6 + 1e-5 * rng.uniform();
        for (int r = 0; r < 3; ++r) {
            m(r, 1) *= squeeze;
        }
        if (polar_is_degenerate(m)) {
            continue;
        }
        Mat q = orthonormal_polar_3x2(m);
        CHECK(orthonormality_defect(q) < 1e-10);
    }
}

TEST_CASE("polar projection rejects degenerate cameras") {
    Mat m{{1, 0}, {0, 0}, {0, 0}};
    CHECK(polar_is_degenerate(m));
    CHECK_THROWS_AS(orthonormal_polar_3x2(m), DegenerateCameraError);
}

TEST_CASE("spectral norm estimate matches the top singular value") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Mat m = random_gaussian(8, 5, rng);
        SvdResult s = svd_thin(m);
        const double want = s.sigma[0] * s.sigma[0];
        CHECK(spectral_norm_sq(m) == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("least squares solves overdetermined systems") {
    Rng rng(42);
    Mat a = random_gaussian(10, 4, rng);
    Mat x_true = random_gaussian(4, 2, rng);
    Mat b = matmul(a, x_true);
    Mat x = least_squares(a, b);
    CHECK(max_abs(sub(x, x_true)) < 1e-10);
}
