#pragma once

#include <vector>

#include "nrsfm/mat.hpp"

namespace nrsfm {

struct SvdResult {
    Mat u;                     // rows x cols, orthonormal columns
    std::vector<double> sigma; // descending, nonnegative
    Mat v;                     // cols x cols, orthonormal
};

/// Thin SVD for rows >= cols. Two-column inputs go through the closed-form
/// eigendecomposition of the 2x2 Gram matrix; wider inputs use one-sided
/// Jacobi sweeps (diagnostics only; dictionaries are small here).
SvdResult svd_thin(const Mat &m);

struct QrResult {
    Mat q; // rows x cols, orthonormal columns
    Mat r; // cols x cols, upper triangular, nonnegative diagonal
};

/// Householder thin QR for rows >= cols, sign-fixed so diag(R) >= 0.
QrResult qr_thin(const Mat &m);

/// Eigendecomposition of the symmetric 2x2 matrix [[a,b],[b,c]]:
/// A = E diag(lam) E^T with lam[0] >= lam[1] and E a rotation.
struct SymEig2 {
    double lam[2];
    double e[2][2]; // columns are eigenvectors
};
SymEig2 sym_eig_2x2(double a, double b, double c);

// Relative threshold below which a camera estimate counts as degenerate:
// sigma_min <= kPolarEps * max(1, ||m||_F).
inline constexpr double kPolarEps = 1e-6;

bool polar_is_degenerate(const Mat &m);

/// Nearest semi-orthonormal matrix U V^T for a 3x2 input, computed as
/// M (M^T M)^{-1/2} through the closed-form Gram eigendecomposition.
/// Throws DegenerateCameraError when sigma_min is below the polar threshold.
Mat orthonormal_polar_3x2(const Mat &m);

/// ||m||_2^2 estimated by 50 power iterations on m^T m (deterministic start).
double spectral_norm_sq(const Mat &m);

/// Least-squares / minimum-norm solve of a x = b via the SVD pseudoinverse.
Mat least_squares(const Mat &a, const Mat &b);

} // namespace nrsfm
