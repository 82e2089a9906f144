#include "nrsfm/rng.hpp"

#include "nrsfm/svd.hpp"

namespace nrsfm {

Mat random_gaussian(int rows, int cols, Rng &rng, double stddev) {
    Mat m(rows, cols);
    for (int i = 0; i < m.size(); ++i) {
        m.data()[i] = stddev * rng.gaussian();
    }
    return m;
}

Mat random_semiorthonormal_3x2(Rng &rng) {
    Mat g = random_gaussian(3, 3, rng);
    QrResult qr = qr_thin(g); // diag(R) >= 0 makes Q Haar-distributed
    Mat m(3, 2);
    for (int r = 0; r < 3; ++r) {
        m(r, 0) = qr.q(r, 0);
        m(r, 1) = qr.q(r, 1);
    }
    return m;
}

} // namespace nrsfm
