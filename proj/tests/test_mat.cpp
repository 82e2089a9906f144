#include "doctest.h"

#include "nrsfm/mat.hpp"
#include "nrsfm/rng.hpp"
#include "oracles.hpp"

using namespace nrsfm;

TEST_CASE("matmul identity and zero cases") {
    Rng rng(7);
    Mat a = random_gaussian(3, 4, rng);
    CHECK(bitwise_equal(matmul(Mat::identity(3), a), a));

    Mat zero(4, 2);
    Mat az = matmul(a, zero);
    CHECK(max_abs(az) == 0.0);
}

TEST_CASE("matmul hand-checked product") {
    Mat a{{1, 2}, {3, 4}};
    Mat b{{5}, {6}};
    Mat c = matmul(a, b);
    CHECK(c(0, 0) == 17.0);
    CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul dimension mismatch throws") {
    Mat a(2, 3), b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Mat a = random_gaussian(4, 6, rng);
        Mat b = random_gaussian(6, 3, rng);
        Mat c = random_gaussian(3, 5, rng);
        Mat left = matmul(matmul(a, b), c);
        Mat right = matmul(a, matmul(b, c));
        const double rel = max_abs(sub(left, right)) / std::max(max_abs(left), 1e-300);
        CHECK(rel < 1e-9);
    }
}

TEST_CASE("transposed product variants agree with explicit transpose") {
    Rng rng(3);
    Mat a = random_gaussian(5, 3, rng);
    Mat b = random_gaussian(5, 4, rng);
    CHECK(bitwise_equal(matmul_tn(a, b), matmul(transpose(a), b)));
    Mat c = random_gaussian(4, 5, rng);
    Mat d = random_gaussian(3, 5, rng);
    CHECK(bitwise_equal(matmul_nt(c, d), matmul(c, transpose(d))));
}

TEST_CASE("constructors reject non-finite entries") {
    CHECK_THROWS_AS(Mat(1, 2, {1.0, std::nan("")}), ContractError);
    CHECK_THROWS_AS(Mat(1, 1, {std::numeric_limits<double>::infinity()}), ContractError);
    CHECK_THROWS_AS(Mat(2, 2, {1.0, 2.0}), ShapeError);
}

TEST_CASE("block matrix views flat rows as 3x2 blocks") {
    Rng rng(11);
    BlockMatrix bm(4);
    Mat b = random_gaussian(3, 2, rng);
    bm.set_block(2, b);
    CHECK(bitwise_equal(bm.block(2), b));
    CHECK(bm.flat().rows() == 12);
    CHECK(bm.flat()(6, 0) == b(0, 0));
    CHECK(bm.block_norm(2) == doctest::Approx(frobenius_norm(b)));
    CHECK_THROWS_AS(BlockMatrix(Mat(7, 2)), ShapeError);
    CHECK_THROWS_AS(BlockMatrix(Mat(6, 3)), ShapeError);
}

TEST_CASE("kron apply: identity dictionary leaves blocks unchanged") {
    Rng rng(5);
    BlockMatrix x(3);
    x.flat() = random_gaussian(9, 2, rng);
    BlockMatrix y = kron_identity_transpose_apply(Mat::identity(3), x);
    CHECK(bitwise_equal(y.flat(), x.flat()));
}

TEST_CASE("kron apply: ones column sums the blocks") {
    Rng rng(6);
    BlockMatrix x(4);
    x.flat() = random_gaussian(12, 2, rng);
    Mat ones(4, 1, {1, 1, 1, 1});
    BlockMatrix y = kron_identity_transpose_apply(ones, x);
    CHECK(y.block_count() == 1);
    Mat expect(3, 2);
    for (int j = 0; j < 4; ++j) {
        expect = add(expect, x.block(j));
    }
    CHECK(max_abs(sub(y.block(0), expect)) < 1e-14);
}

TEST_CASE("kron apply matches the explicit Kronecker oracle") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const int k_in = 1 + static_cast<int>(rng.index(8));
        const int k_out = 1 + static_cast<int>(rng.index(8));
        Mat d = random_gaussian(k_in, k_out, rng);
        BlockMatrix x(k_in);
        x.flat() = random_gaussian(3 * k_in, 2, rng);
        BlockMatrix got = kron_identity_transpose_apply(d, x);
        Mat want = oracles::explicit_kron_transpose_apply(d, x.flat());
        CHECK(max_abs(sub(got.flat(), want)) < 1e-12);
    }
}

TEST_CASE("kron apply rejects mismatched block count") {
    BlockMatrix x(3);
    CHECK_THROWS_AS(kron_identity_transpose_apply(Mat(4, 2), x), ShapeError);
}

TEST_CASE("dai reshape round trip is exact") {
    Rng rng(9);
    Mat d1 = random_gaussian(3 * 7, 5, rng);
    Mat sharp = dai_reshape_to_sharp(d1, 7);
    CHECK(sharp.rows() == 7);
    CHECK(sharp.cols() == 15);
    CHECK(bitwise_equal(dai_reshape_to_d1(sharp), d1));
    // S = D1#(psi (x) I3) equals the reshape of D1 psi
    Mat psi = random_gaussian(5, 1, rng);
    Mat s_vec = matmul(d1, psi); // 21 x 1
    Mat kron_psi(15, 3);
    for (int j = 0; j < 5; ++j) {
        for (int c = 0; c < 3; ++c) {
            kron_psi(3 * j + c, c) = psi(j, 0);
        }
    }
    Mat s_mat = matmul(sharp, kron_psi); // 7 x 3
    CHECK(max_abs(sub(s_mat, s_vec.reshaped(7, 3))) < 1e-12);
}
