#include "nrsfm/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nrsfm {

namespace {

// Unit vector orthogonal to the first `have` columns of u, written into
// column `target`. Candidate seeds are the canonical basis vectors; the one
// with the largest residual after projection wins.
void complete_orthonormal_column(Mat &u, int have, int target) {
    const int n = u.rows();
    std::vector<double> best(n, 0.0);
    double best_norm = -1.0;
    for (int cand = 0; cand < n; ++cand) {
        std::vector<double> w(n, 0.0);
        w[cand] = 1.0;
        for (int c = 0; c < have; ++c) {
            double proj = 0.0;
            for (int r = 0; r < n; ++r) {
                proj += u(r, c) * w[r];
            }
            for (int r = 0; r < n; ++r) {
                w[r] -= proj * u(r, c);
            }
        }
        double nn = 0.0;
        for (double x : w) {
            nn += x * x;
        }
        if (nn > best_norm) {
            best_norm = nn;
            best = w;
        }
    }
    const double inv = 1.0 / std::sqrt(best_norm);
    for (int r = 0; r < n; ++r) {
        u(r, target) = best[r] * inv;
    }
}

// Closed-form thin SVD for a rows x 2 matrix via the 2x2 Gram matrix.
SvdResult svd_two_columns(const Mat &m) {
    const int rows = m.rows();
    double a = 0.0, b = 0.0, c = 0.0;
    for (int r = 0; r < rows; ++r) {
        a += m(r, 0) * m(r, 0);
        b += m(r, 0) * m(r, 1);
        c += m(r, 1) * m(r, 1);
    }
    SymEig2 eig = sym_eig_2x2(a, b, c);

    SvdResult out;
    out.sigma = {std::sqrt(std::max(eig.lam[0], 0.0)), std::sqrt(std::max(eig.lam[1], 0.0))};
    out.v = Mat(2, 2);
    for (int r = 0; r < 2; ++r) {
        for (int cidx = 0; cidx < 2; ++cidx) {
            out.v(r, cidx) = eig.e[r][cidx];
        }
    }

    out.u = Mat(rows, 2);
    const double tiny = 1e-140;
    for (int j = 0; j < 2; ++j) {
        if (out.sigma[j] > tiny) {
            for (int r = 0; r < rows; ++r) {
                out.u(r, j) = (m(r, 0) * out.v(0, j) + m(r, 1) * out.v(1, j)) / out.sigma[j];
            }
            // re-orthonormalize against earlier columns; a no-op up to
            // rounding when the Gram eigenpairs are well separated
            for (int c2 = 0; c2 < j; ++c2) {
                double proj = 0.0;
                for (int r = 0; r < rows; ++r) {
                    proj += out.u(r, c2) * out.u(r, j);
                }
                for (int r = 0; r < rows; ++r) {
                    out.u(r, j) -= proj * out.u(r, c2);
                }
            }
            double nn = col_norm(out.u, j);
            if (nn > 0.0) {
                for (int r = 0; r < rows; ++r) {
                    out.u(r, j) /= nn;
                }
            } else {
                complete_orthonormal_column(out.u, j, j);
            }
        } else {
            out.sigma[j] = 0.0;
            complete_orthonormal_column(out.u, j, j);
        }
    }
    return out;
}

// One-sided Jacobi (Hestenes): orthogonalize column pairs of a working copy,
// accumulating the rotations in V.
SvdResult svd_jacobi(const Mat &m) {
    const int rows = m.rows(), cols = m.cols();
    Mat b = m;
    Mat v = Mat::identity(cols);

    const int max_sweeps = 60;
    const double tol = 1e-14;
    double worst = 0.0;
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        worst = 0.0;
        for (int p = 0; p < cols - 1; ++p) {
            for (int q = p + 1; q < cols; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int r = 0; r < rows; ++r) {
                    alpha += b(r, p) * b(r, p);
                    beta += b(r, q) * b(r, q);
                    gamma += b(r, p) * b(r, q);
                }
                const double denom = std::sqrt(alpha * beta);
                if (denom == 0.0 || gamma == 0.0) {
                    continue;
                }
                const double rel = std::fabs(gamma) / denom;
                worst = std::max(worst, rel);
                if (rel <= tol) {
                    continue;
                }
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (int r = 0; r < rows; ++r) {
                    const double bp = b(r, p), bq = b(r, q);
                    b(r, p) = cs * bp - sn * bq;
                    b(r, q) = sn * bp + cs * bq;
                }
                for (int r = 0; r < cols; ++r) {
                    const double vp = v(r, p), vq = v(r, q);
                    v(r, p) = cs * vp - sn * vq;
                    v(r, q) = sn * vp + cs * vq;
                }
            }
        }
        converged = worst <= tol;
    }
    if (!converged && worst > 1e-10) {
        std::ostringstream os;
        os << "svd_thin: Jacobi sweeps did not converge, residual " << worst;
        throw NumericError(os.str());
    }

    std::vector<double> sigma(cols);
    for (int j = 0; j < cols; ++j) {
        sigma[j] = col_norm(b, j);
    }
    std::vector<int> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sigma[x] > sigma[y]; });

    SvdResult out;
    out.sigma.resize(cols);
    out.u = Mat(rows, cols);
    out.v = Mat(cols, cols);
    for (int j = 0; j < cols; ++j) {
        const int src = order[j];
        out.sigma[j] = sigma[src];
        for (int r = 0; r < cols; ++r) {
            out.v(r, j) = v(r, src);
        }
        if (out.sigma[j] > 0.0) {
            for (int r = 0; r < rows; ++r) {
                out.u(r, j) = b(r, src) / out.sigma[j];
            }
        } else {
            complete_orthonormal_column(out.u, j, j);
        }
    }
    return out;
}

} // namespace

SymEig2 sym_eig_2x2(double a, double b, double c) {
    SymEig2 out;
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    // with this theta the rotated diagonal comes out already sorted:
    // lam0 - lam1 = hypot(a - c, 2b) >= 0
    out.lam[0] = a * cs * cs + 2.0 * b * cs * sn + c * sn * sn;
    out.lam[1] = a * sn * sn - 2.0 * b * cs * sn + c * cs * cs;
    out.e[0][0] = cs;
    out.e[1][0] = sn;
    out.e[0][1] = -sn;
    out.e[1][1] = cs;
    return out;
}

SvdResult svd_thin(const Mat &m) {
    if (m.rows() < m.cols()) {
        throw ShapeError("svd_thin: requires rows >= cols");
    }
    if (m.cols() == 0) {
        return {Mat(m.rows(), 0), {}, Mat(0, 0)};
    }
    if (m.cols() == 1) {
        SvdResult out;
        out.sigma = {col_norm(m, 0)};
        out.v = Mat{{1.0}};
        out.u = Mat(m.rows(), 1);
        if (out.sigma[0] > 0.0) {
            for (int r = 0; r < m.rows(); ++r) {
                out.u(r, 0) = m(r, 0) / out.sigma[0];
            }
        } else {
            out.u(0, 0) = 1.0;
        }
        return out;
    }
    if (m.cols() == 2) {
        return svd_two_columns(m);
    }
    return svd_jacobi(m);
}

QrResult qr_thin(const Mat &m) {
    const int rows = m.rows(), cols = m.cols();
    if (rows < cols) {
        throw ShapeError("qr_thin: requires rows >= cols");
    }
    Mat a = m;
    std::vector<std::vector<double>> hh(cols);

    for (int j = 0; j < cols; ++j) {
        double normx = 0.0;
        for (int r = j; r < rows; ++r) {
            normx += a(r, j) * a(r, j);
        }
        normx = std::sqrt(normx);
        std::vector<double> v(rows - j, 0.0);
        if (normx > 0.0) {
            const double alpha = a(j, j) >= 0.0 ? -normx : normx;
            for (int r = j; r < rows; ++r) {
                v[r - j] = a(r, j);
            }
            v[0] -= alpha;
            double vn = 0.0;
            for (double x : v) {
                vn += x * x;
            }
            vn = std::sqrt(vn);
            if (vn > 0.0) {
                for (double &x : v) {
                    x /= vn;
                }
                for (int c = j; c < cols; ++c) {
                    double proj = 0.0;
                    for (int r = j; r < rows; ++r) {
                        proj += v[r - j] * a(r, c);
                    }
                    for (int r = j; r < rows; ++r) {
                        a(r, c) -= 2.0 * proj * v[r - j];
                    }
                }
            }
        }
        hh[j] = std::move(v);
    }

    QrResult out;
    out.r = Mat(cols, cols);
    for (int i = 0; i < cols; ++i) {
        for (int j = i; j < cols; ++j) {
            out.r(i, j) = a(i, j);
        }
    }

    // Q = H_0 ... H_{c-1} [I; 0]
    out.q = Mat(rows, cols);
    for (int j = 0; j < cols; ++j) {
        out.q(j, j) = 1.0;
    }
    for (int j = cols - 1; j >= 0; --j) {
        const auto &v = hh[j];
        if (v.empty()) {
            continue;
        }
        for (int c = 0; c < cols; ++c) {
            double proj = 0.0;
            for (int r = j; r < rows; ++r) {
                proj += v[r - j] * out.q(r, c);
            }
            if (proj != 0.0) {
                for (int r = j; r < rows; ++r) {
                    out.q(r, c) -= 2.0 * proj * v[r - j];
                }
            }
        }
    }

    for (int j = 0; j < cols; ++j) {
        if (out.r(j, j) < 0.0) {
            for (int c = j; c < cols; ++c) {
                out.r(j, c) = -out.r(j, c);
            }
            for (int r = 0; r < rows; ++r) {
                out.q(r, j) = -out.q(r, j);
            }
        }
    }
    return out;
}

bool polar_is_degenerate(const Mat &m) {
    if (m.rows() != 3 || m.cols() != 2) {
        throw ShapeError("polar_is_degenerate: input must be 3x2");
    }
    double a = 0.0, b = 0.0, c = 0.0;
    for (int r = 0; r < 3; ++r) {
        a += m(r, 0) * m(r, 0);
        b += m(r, 0) * m(r, 1);
        c += m(r, 1) * m(r, 1);
    }
    SymEig2 eig = sym_eig_2x2(a, b, c);
    const double sig_min = std::sqrt(std::max(eig.lam[1], 0.0));
    const double fro = std::sqrt(a + c);
    return sig_min <= kPolarEps * std::max(1.0, fro);
}

Mat orthonormal_polar_3x2(const Mat &m) {
    if (m.rows() != 3 || m.cols() != 2) {
        throw ShapeError("orthonormal_polar_3x2: input must be 3x2");
    }
    double a = 0.0, b = 0.0, c = 0.0;
    for (int r = 0; r < 3; ++r) {
        a += m(r, 0) * m(r, 0);
        b += m(r, 0) * m(r, 1);
        c += m(r, 1) * m(r, 1);
    }
    SymEig2 eig = sym_eig_2x2(a, b, c);
    const double fro = std::sqrt(a + c);
    const double sig_min = std::sqrt(std::max(eig.lam[1], 0.0));
    if (sig_min <= kPolarEps * std::max(1.0, fro)) {
        throw DegenerateCameraError("orthonormal_polar_3x2: sigma_min below polar threshold");
    }

    // G = E diag(1/sqrt(lam)) E^T, Q = M G
    const double is0 = 1.0 / std::sqrt(eig.lam[0]);
    const double is1 = 1.0 / std::sqrt(eig.lam[1]);
    double g[2][2];
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            g[i][j] = eig.e[i][0] * is0 * eig.e[j][0] + eig.e[i][1] * is1 * eig.e[j][1];
        }
    }
    Mat q(3, 2);
    for (int r = 0; r < 3; ++r) {
        for (int j = 0; j < 2; ++j) {
            q(r, j) = m(r, 0) * g[0][j] + m(r, 1) * g[1][j];
        }
    }

    // Gram-Schmidt cleanup keeps the columns orthonormal to machine
    // precision even when the Gram eigenvalues nearly cancel.
    double n0 = col_norm(q, 0);
    for (int r = 0; r < 3; ++r) {
        q(r, 0) /= n0;
    }
    double proj = q(0, 0) * q(0, 1) + q(1, 0) * q(1, 1) + q(2, 0) * q(2, 1);
    for (int r = 0; r < 3; ++r) {
        q(r, 1) -= proj * q(r, 0);
    }
    double n1 = col_norm(q, 1);
    if (n1 == 0.0) {
        complete_orthonormal_column(q, 1, 1);
    } else {
        for (int r = 0; r < 3; ++r) {
            q(r, 1) /= n1;
        }
    }
    return q;
}

double spectral_norm_sq(const Mat &m) {
    const int n = m.cols();
    if (n == 0) {
        return 0.0;
    }
    std::vector<double> v(n);
    double nn = 0.0;
    for (int i = 0; i < n; ++i) {
        v[i] = 1.0 + 1e-3 * i; // deterministic, breaks symmetric ties
        nn += v[i] * v[i];
    }
    nn = std::sqrt(nn);
    for (double &x : v) {
        x /= nn;
    }

    std::vector<double> mv(m.rows()), w(n);
    double rayleigh = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        for (int r = 0; r < m.rows(); ++r) {
            double s = 0.0;
            for (int c = 0; c < n; ++c) {
                s += m(r, c) * v[c];
            }
            mv[r] = s;
        }
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int r = 0; r < m.rows(); ++r) {
                s += m(r, c) * mv[r];
            }
            w[c] = s;
        }
        double wn = 0.0;
        rayleigh = 0.0;
        for (int c = 0; c < n; ++c) {
            rayleigh += v[c] * w[c];
            wn += w[c] * w[c];
        }
        wn = std::sqrt(wn);
        if (wn == 0.0) {
            return 0.0;
        }
        for (int c = 0; c < n; ++c) {
            v[c] = w[c] / wn;
        }
    }
    return rayleigh;
}

Mat least_squares(const Mat &a, const Mat &b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("least_squares: row counts differ");
    }
    if (a.rows() >= a.cols()) {
        SvdResult s = svd_thin(a);
        const double cutoff =
            (s.sigma.empty() ? 0.0 : s.sigma[0]) * 1e-12;
        Mat utb = matmul_tn(s.u, b);
        for (int i = 0; i < utb.rows(); ++i) {
            const double sv = s.sigma[i];
            const double f = sv > cutoff ? 1.0 / sv : 0.0;
            for (int j = 0; j < utb.cols(); ++j) {
                utb(i, j) *= f;
            }
        }
        return matmul(s.v, utb);
    }
    // Underdetermined: minimum-norm solution through the SVD of a^T.
    SvdResult s = svd_thin(transpose(a)); // a = v s u^T
    const double cutoff = (s.sigma.empty() ? 0.0 : s.sigma[0]) * 1e-12;
    Mat vtb = matmul_tn(s.v, b);
    for (int i = 0; i < vtb.rows(); ++i) {
        const double sv = s.sigma[i];
        const double f = sv > cutoff ? 1.0 / sv : 0.0;
        for (int j = 0; j < vtb.cols(); ++j) {
            vtb(i, j) *= f;
        }
    }
    return matmul(s.u, vtb);
}

} // namespace nrsfm
