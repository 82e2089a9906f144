#include "nrsfm/autodiff.hpp"

#include <cmath>

#include "nrsfm/svd.hpp"

namespace nrsfm {

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node &Tape::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw ContractError("Tape: var not recorded on this tape");
    }
    return nodes_[v.id];
}

const Mat &Tape::value(Var v) const { return node(v).value; }

Var Tape::input(Mat value) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
    if (transpose_a && transpose_b) {
        throw ContractError("Tape::matmul: at most one side may be transposed");
    }
    const Mat &av = value(a);
    const Mat &bv = value(b);
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.ta = transpose_a;
    n.tb = transpose_b;
    if (transpose_a) {
        n.value = matmul_tn(av, bv);
    } else if (transpose_b) {
        n.value = matmul_nt(av, bv);
    } else {
        n.value = nrsfm::matmul(av, bv);
    }
    return push(std::move(n));
}

Var Tape::kron_apply(Var d, Var x) {
    const Mat &dv = value(d);
    const Mat &xv = value(x);
    Node n;
    n.op = Op::KronApply;
    n.a = d.id;
    n.b = x.id;
    n.value = kron_identity_transpose_apply(dv, BlockMatrix(xv)).flat();
    return push(std::move(n));
}

Var Tape::relu_bias_block(Var x, Var b) {
    const Mat &xv = value(x);
    const Mat &bv = value(b);
    if (xv.cols() != 2 || xv.rows() % 3 != 0) {
        throw ShapeError("relu_bias_block: x must be a flat (3k) x 2 code");
    }
    if (bv.cols() != 1 || bv.rows() * 3 != xv.rows()) {
        throw ShapeError("relu_bias_block: threshold length must match block count");
    }
    Node n;
    n.op = Op::ReluBiasBlock;
    n.a = x.id;
    n.b = b.id;
    Mat out(xv.rows(), 2);
    for (int r = 0; r < xv.rows(); ++r) {
        const double t = bv(r / 3, 0);
        out(r, 0) = std::max(xv(r, 0) - t, 0.0);
        out(r, 1) = std::max(xv(r, 1) - t, 0.0);
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Var Tape::relu_bias_elem(Var x, Var b) {
    const Mat &xv = value(x);
    const Mat &bv = value(b);
    if (!xv.same_shape(bv)) {
        throw ShapeError("relu_bias_elem: threshold shape must match input");
    }
    Node n;
    n.op = Op::ReluBiasElem;
    n.a = x.id;
    n.b = b.id;
    Mat out(xv.rows(), xv.cols());
    for (int i = 0; i < xv.size(); ++i) {
        out.data()[i] = std::max(xv.data()[i] - bv.data()[i], 0.0);
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Var Tape::block_combine(Var x, Var c) {
    const Mat &xv = value(x);
    const Mat &cv = value(c);
    if (xv.cols() != 2 || xv.rows() % 3 != 0) {
        throw ShapeError("block_combine: x must be a flat (3k) x 2 code");
    }
    if (cv.cols() != 1 || cv.rows() * 3 != xv.rows()) {
        throw ShapeError("block_combine: coefficient length must match block count");
    }
    Node n;
    n.op = Op::BlockCombine;
    n.a = x.id;
    n.b = c.id;
    Mat out(3, 2);
    const int k = cv.rows();
    for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 2; ++col) {
            double s = 0.0;
            for (int j = 0; j < k; ++j) {
                s += cv(j, 0) * xv(3 * j + r, col);
            }
            out(r, col) = s;
        }
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Var Tape::orthonormalize_3x2(Var m) {
    Node n;
    n.op = Op::Orthonormalize;
    n.a = m.id;
    n.value = orthonormal_polar_3x2(value(m));
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.value = nrsfm::sub(value(a), value(b));
    return push(std::move(n));
}

Var Tape::frobenius_norm(Var x) {
    Node n;
    n.op = Op::FrobeniusNorm;
    n.a = x.id;
    n.value = Mat(1, 1, {nrsfm::frobenius_norm(value(x))});
    return push(std::move(n));
}

Var Tape::square(Var x) {
    const Mat &xv = value(x);
    Node n;
    n.op = Op::Square;
    n.a = x.id;
    Mat out(xv.rows(), xv.cols());
    for (int i = 0; i < xv.size(); ++i) {
        out.data()[i] = xv.data()[i] * xv.data()[i];
    }
    n.value = std::move(out);
    return push(std::move(n));
}

Var Tape::reshape(Var x, int rows, int cols) {
    Node n;
    n.op = Op::Reshape;
    n.a = x.id;
    n.value = value(x).reshaped(rows, cols);
    return push(std::move(n));
}

Var Tape::dai_reshape(Var d1_sharp) {
    Node n;
    n.op = Op::DaiReshape;
    n.a = d1_sharp.id;
    n.value = dai_reshape_to_d1(value(d1_sharp));
    return push(std::move(n));
}

void Tape::backward_into(const Node &n, const Mat &gbar, std::vector<Mat> &adj) const {
    auto accumulate = [&](int id, const Mat &g) {
        if (adj[id].empty()) {
            adj[id] = g;
        } else {
            adj[id] = nrsfm::add(adj[id], g);
        }
    };

    switch (n.op) {
    case Op::Input:
        break;
    case Op::MatMul: {
        const Mat &av = nodes_[n.a].value;
        const Mat &bv = nodes_[n.b].value;
        if (n.ta) {
            // C = A^T B: dA = B G^T, dB = A G
            accumulate(n.a, matmul_nt(bv, gbar));
            accumulate(n.b, nrsfm::matmul(av, gbar));
        } else if (n.tb) {
            // C = A B^T: dA = G B, dB = G^T A
            accumulate(n.a, nrsfm::matmul(gbar, bv));
            accumulate(n.b, matmul_tn(gbar, av));
        } else {
            accumulate(n.a, matmul_nt(gbar, bv));
            accumulate(n.b, matmul_tn(av, gbar));
        }
        break;
    }
    case Op::KronApply: {
        const Mat &dv = nodes_[n.a].value;
        const Mat &xv = nodes_[n.b].value;
        const int k_in = dv.rows();
        const int k_out = dv.cols();
        Mat gd(k_in, k_out);
        for (int i = 0; i < k_in; ++i) {
            for (int j = 0; j < k_out; ++j) {
                double s = 0.0;
                for (int r = 0; r < 3; ++r) {
                    s += gbar(3 * j + r, 0) * xv(3 * i + r, 0) +
                         gbar(3 * j + r, 1) * xv(3 * i + r, 1);
                }
                gd(i, j) = s;
            }
        }
        accumulate(n.a, gd);
        Mat gx(xv.rows(), 2);
        for (int i = 0; i < k_in; ++i) {
            for (int r = 0; r < 3; ++r) {
                double s0 = 0.0, s1 = 0.0;
                for (int j = 0; j < k_out; ++j) {
                    const double w = dv(i, j);
                    s0 += w * gbar(3 * j + r, 0);
                    s1 += w * gbar(3 * j + r, 1);
                }
                gx(3 * i + r, 0) = s0;
                gx(3 * i + r, 1) = s1;
            }
        }
        accumulate(n.b, gx);
        break;
    }
    case Op::ReluBiasBlock: {
        const Mat &xv = nodes_[n.a].value;
        const Mat &bv = nodes_[n.b].value;
        Mat gx(xv.rows(), 2);
        Mat gb(bv.rows(), 1);
        for (int r = 0; r < xv.rows(); ++r) {
            const double t = bv(r / 3, 0);
            for (int c = 0; c < 2; ++c) {
                if (xv(r, c) - t > 0.0) {
                    gx(r, c) = gbar(r, c);
                    gb(r / 3, 0) -= gbar(r, c);
                }
            }
        }
        accumulate(n.a, gx);
        accumulate(n.b, gb);
        break;
    }
    case Op::ReluBiasElem: {
        const Mat &xv = nodes_[n.a].value;
        const Mat &bv = nodes_[n.b].value;
        Mat gx(xv.rows(), xv.cols());
        Mat gb(bv.rows(), bv.cols());
        for (int i = 0; i < xv.size(); ++i) {
            if (xv.data()[i] - bv.data()[i] > 0.0) {
                gx.data()[i] = gbar.data()[i];
                gb.data()[i] = -gbar.data()[i];
            }
        }
        accumulate(n.a, gx);
        accumulate(n.b, gb);
        break;
    }
    case Op::BlockCombine: {
        const Mat &xv = nodes_[n.a].value;
        const Mat &cv = nodes_[n.b].value;
        const int k = cv.rows();
        Mat gx(xv.rows(), 2);
        Mat gc(k, 1);
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 2; ++c) {
                    s += gbar(r, c) * xv(3 * j + r, c);
                    gx(3 * j + r, c) = cv(j, 0) * gbar(r, c);
                }
            }
            gc(j, 0) = s;
        }
        accumulate(n.a, gx);
        accumulate(n.b, gc);
        break;
    }
    case Op::Orthonormalize: {
        // Reverse-mode polar derivative. With A = M^T M = E diag(lam) E^T,
        // s_i = sqrt(lam_i), G = A^{-1/2} and Q = M G:
        //   dQ = dM G - Q dH G,  where dH solves dH H + H dH = dA.
        // The Sylvester solve is entrywise division by (s_i + s_j) in the
        // eigenbasis and is self-adjoint, which gives
        //   grad_M = Gbar G - 2 M P,  P = sylv(sym(Q^T Gbar G)).
        const Mat &mv = nodes_[n.a].value;
        double a = 0.0, b = 0.0, c = 0.0;
        for (int r = 0; r < 3; ++r) {
            a += mv(r, 0) * mv(r, 0);
            b += mv(r, 0) * mv(r, 1);
            c += mv(r, 1) * mv(r, 1);
        }
        SymEig2 eig = sym_eig_2x2(a, b, c);
        const double s0 = std::sqrt(std::max(eig.lam[0], 0.0));
        const double s1 = std::sqrt(std::max(eig.lam[1], 0.0));
        double g[2][2];
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                g[i][j] = eig.e[i][0] / s0 * eig.e[j][0] + eig.e[i][1] / s1 * eig.e[j][1];
            }
        }
        // q = M G (the analytic polar factor; forward value only differs by
        // the orthonormality cleanup, which is O(eps) off this)
        double q[3][2];
        for (int r = 0; r < 3; ++r) {
            for (int j = 0; j < 2; ++j) {
                q[r][j] = mv(r, 0) * g[0][j] + mv(r, 1) * g[1][j];
            }
        }
        // B = sym(Q^T Gbar G)
        double qtg[2][2] = {{0, 0}, {0, 0}};
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (int r = 0; r < 3; ++r) {
                    qtg[i][j] += q[r][i] * gbar(r, j);
                }
            }
        }
        double bm[2][2];
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                bm[i][j] = qtg[i][0] * g[0][j] + qtg[i][1] * g[1][j];
            }
        }
        double bs[2][2];
        bs[0][0] = bm[0][0];
        bs[1][1] = bm[1][1];
        bs[0][1] = bs[1][0] = 0.5 * (bm[0][1] + bm[1][0]);
        // P = E [ (E^T B E)_{ij} / (s_i + s_j) ] E^T
        double ebe[2][2] = {{0, 0}, {0, 0}};
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (int x = 0; x < 2; ++x) {
                    for (int y = 0; y < 2; ++y) {
                        ebe[i][j] += eig.e[x][i] * bs[x][y] * eig.e[y][j];
                    }
                }
            }
        }
        const double sums[2] = {s0, s1};
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                ebe[i][j] /= (sums[i] + sums[j]);
            }
        }
        double p[2][2] = {{0, 0}, {0, 0}};
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (int x = 0; x < 2; ++x) {
                    for (int y = 0; y < 2; ++y) {
                        p[i][j] += eig.e[i][x] * ebe[x][y] * eig.e[j][y];
                    }
                }
            }
        }
        Mat gm(3, 2);
        for (int r = 0; r < 3; ++r) {
            for (int j = 0; j < 2; ++j) {
                gm(r, j) = gbar(r, 0) * g[0][j] + gbar(r, 1) * g[1][j] -
                           2.0 * (mv(r, 0) * p[0][j] + mv(r, 1) * p[1][j]);
            }
        }
        accumulate(n.a, gm);
        break;
    }
    case Op::Sub:
        accumulate(n.a, gbar);
        accumulate(n.b, scale(gbar, -1.0));
        break;
    case Op::FrobeniusNorm: {
        const Mat &xv = nodes_[n.a].value;
        const double norm = n.value(0, 0);
        if (norm > 0.0) {
            accumulate(n.a, scale(xv, gbar(0, 0) / norm));
        } else {
            accumulate(n.a, Mat(xv.rows(), xv.cols()));
        }
        break;
    }
    case Op::Square: {
        const Mat &xv = nodes_[n.a].value;
        Mat gx(xv.rows(), xv.cols());
        for (int i = 0; i < xv.size(); ++i) {
            gx.data()[i] = 2.0 * xv.data()[i] * gbar.data()[i];
        }
        accumulate(n.a, gx);
        break;
    }
    case Op::Reshape: {
        const Mat &xv = nodes_[n.a].value;
        accumulate(n.a, gbar.reshaped(xv.rows(), xv.cols()));
        break;
    }
    case Op::DaiReshape: {
        const Mat &xv = nodes_[n.a].value; // p x 3k
        const int p = xv.rows();
        const int k = xv.cols() / 3;
        Mat gx(p, 3 * k);
        for (int l = 0; l < p; ++l) {
            for (int j = 0; j < k; ++j) {
                for (int c = 0; c < 3; ++c) {
                    gx(l, 3 * j + c) = gbar(3 * l + c, j);
                }
            }
        }
        accumulate(n.a, gx);
        break;
    }
    }
}

std::vector<Mat> Tape::grad(Var loss, const std::vector<Var> &wrt) const {
    const Node &ln = node(loss);
    if (ln.value.rows() != 1 || ln.value.cols() != 1) {
        throw ContractError("Tape::grad: loss must be scalar-shaped");
    }
    std::vector<Mat> adj(nodes_.size());
    adj[loss.id] = Mat(1, 1, {1.0});

    for (int id = loss.id; id >= 0; --id) {
        if (adj[id].empty()) {
            continue;
        }
        backward_into(nodes_[id], adj[id], adj);
    }

    std::vector<Mat> out;
    out.reserve(wrt.size());
    for (Var v : wrt) {
        const Node &n = node(v);
        if (adj[v.id].empty()) {
            out.emplace_back(n.value.rows(), n.value.cols());
        } else {
            out.push_back(adj[v.id]);
        }
    }
    return out;
}

} // namespace nrsfm
