#include "doctest.h"

#include "nrsfm/rng.hpp"
#include "nrsfm/svd.hpp"

using namespace nrsfm;

TEST_CASE("random semiorthonormal satisfies the defining property") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        Mat m = random_semiorthonormal_3x2(rng);
        CHECK(max_abs(sub(matmul_tn(m, m), Mat::identity(2))) < 1e-12);
    }
}

TEST_CASE("fixed seed reproduces the camera bitwise") {
    Rng a(123), b(123);
    Mat ma = random_semiorthonormal_3x2(a);
    Mat mb = random_semiorthonormal_3x2(b);
    CHECK(bitwise_equal(ma, mb));
}

TEST_CASE("camera entries have zero mean over many samples") {
    // each entry of a Haar column has mean 0 and variance 1/3
    const int n = 10000;
    Rng rng(2024);
    double mean[3][2] = {};
    for (int i = 0; i < n; ++i) {
        Mat m = random_semiorthonormal_3x2(rng);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                mean[r][c] += m(r, c);
            }
        }
    }
    const double three_sigma = 3.0 * std::sqrt(1.0 / 3.0 / n);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 2; ++c) {
            CHECK(std::fabs(mean[r][c] / n) < three_sigma);
        }
    }
}

TEST_CASE("gaussian moments are sane") {
    Rng rng(1);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::fabs(sum / n) < 0.01);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("bounded index stays in range and shuffle is a permutation") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.index(7) < 7);
    }
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) {
        CHECK(sorted[i] == i);
    }
}
