#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nrsfm/mat.hpp"

namespace nrsfm {

/// Seeded generator with explicitly specified derivations (no
/// std::*_distribution, whose output is implementation-defined). Every
/// stochastic operation takes one of these; seed 0 is the global default.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller with a cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform index in [0, n); unbiased via rejection.
    size_t index(size_t n) {
        if (n == 0) {
            throw ContractError("Rng::index: n must be positive");
        }
        const uint64_t threshold = (0 - static_cast<uint64_t>(n)) % n;
        uint64_t x = next_u64();
        while (x < threshold) {
            x = next_u64();
        }
        return static_cast<size_t>(x % n);
    }

    /// Fisher-Yates; std::shuffle is implementation-defined.
    template <class T>
    void shuffle(std::vector<T> &v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Mat random_gaussian(int rows, int cols, Rng &rng, double stddev = 1.0);

/// Random M with M^T M = I_2, invariant under left rotation: QR of a 3x3
/// standard-Gaussian matrix, first two columns, R diagonal sign-fixed.
Mat random_semiorthonormal_3x2(Rng &rng);

} // namespace nrsfm
