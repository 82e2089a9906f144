#include "nrsfm/model.hpp"

#include <cmath>

#include "nrsfm/svd.hpp"

namespace nrsfm {

void ModelDims::validate() const {
    if (p <= 0) {
        throw ContractError("ModelDims: p must be positive");
    }
    if (k.empty()) {
        throw ContractError("ModelDims: at least one layer width required");
    }
    for (int ki : k) {
        if (ki <= 0) {
            throw ContractError("ModelDims: layer widths must be positive");
        }
    }
}

std::vector<Mat *> ModelParams::tensors() {
    std::vector<Mat *> out;
    out.push_back(&d1_sharp);
    for (auto &d : dicts) {
        out.push_back(&d);
    }
    for (auto &b : enc_thresholds) {
        out.push_back(&b);
    }
    for (auto &b : dec_thresholds) {
        out.push_back(&b);
    }
    out.push_back(&readout);
    out.push_back(&cam_coeffs);
    return out;
}

std::vector<const Mat *> ModelParams::tensors() const {
    auto mut = const_cast<ModelParams *>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
    std::vector<std::string> out;
    out.push_back("d1_sharp");
    for (size_t i = 0; i < dicts.size(); ++i) {
        out.push_back("d" + std::to_string(i + 2));
    }
    for (size_t i = 0; i < enc_thresholds.size(); ++i) {
        out.push_back("enc_b" + std::to_string(i + 1));
    }
    for (size_t i = 0; i < dec_thresholds.size(); ++i) {
        out.push_back("dec_b" + std::to_string(i + 2));
    }
    out.push_back("readout");
    out.push_back("cam_coeffs");
    return out;
}

void ModelParams::validate() const {
    dims.validate();
    const int n = dims.n();
    if (d1_sharp.rows() != dims.p || d1_sharp.cols() != 3 * dims.k[0]) {
        throw ShapeError("ModelParams: d1_sharp must be p x 3k_1");
    }
    if (static_cast<int>(dicts.size()) != n - 1 ||
        static_cast<int>(enc_thresholds.size()) != n ||
        static_cast<int>(dec_thresholds.size()) != n - 1) {
        throw ShapeError("ModelParams: tensor counts do not match dims");
    }
    for (int i = 0; i < n - 1; ++i) {
        if (dicts[i].rows() != dims.k[i] || dicts[i].cols() != dims.k[i + 1]) {
            throw ShapeError("ModelParams: D" + std::to_string(i + 2) + " shape mismatch");
        }
        if (dec_thresholds[i].rows() != dims.k[i] || dec_thresholds[i].cols() != 1) {
            throw ShapeError("ModelParams: decoder threshold shape mismatch");
        }
    }
    for (int i = 0; i < n; ++i) {
        if (enc_thresholds[i].rows() != dims.k[i] || enc_thresholds[i].cols() != 1) {
            throw ShapeError("ModelParams: encoder threshold shape mismatch");
        }
    }
    const int kn = dims.k.back();
    if (readout.rows() != kn || readout.cols() != 6 * kn) {
        throw ShapeError("ModelParams: readout must be k_n x 6k_n");
    }
    if (cam_coeffs.rows() != kn || cam_coeffs.cols() != 1) {
        throw ShapeError("ModelParams: cam_coeffs must be k_n x 1");
    }
    for (const auto &b : enc_thresholds) {
        for (int i = 0; i < b.size(); ++i) {
            if (b.data()[i] < 0.0) {
                throw ContractError("ModelParams: thresholds must be nonnegative");
            }
        }
    }
    for (const auto &b : dec_thresholds) {
        for (int i = 0; i < b.size(); ++i) {
            if (b.data()[i] < 0.0) {
                throw ContractError("ModelParams: thresholds must be nonnegative");
            }
        }
    }
}

std::vector<Var> ParamVars::all() const {
    std::vector<Var> out;
    out.push_back(d1_sharp);
    out.insert(out.end(), dicts.begin(), dicts.end());
    out.insert(out.end(), enc_b.begin(), enc_b.end());
    out.insert(out.end(), dec_b.begin(), dec_b.end());
    out.push_back(readout);
    out.push_back(cam_coeffs);
    return out;
}

ParamVars register_params(Tape &tape, const ModelParams &params) {
    ParamVars pv;
    pv.d1_sharp = tape.input(params.d1_sharp);
    for (const auto &d : params.dicts) {
        pv.dicts.push_back(tape.input(d));
    }
    for (const auto &b : params.enc_thresholds) {
        pv.enc_b.push_back(tape.input(b));
    }
    for (const auto &b : params.dec_thresholds) {
        pv.dec_b.push_back(tape.input(b));
    }
    pv.readout = tape.input(params.readout);
    pv.cam_coeffs = tape.input(params.cam_coeffs);
    return pv;
}

std::vector<Var> record_encode(Tape &tape, const ParamVars &pv, Var w) {
    std::vector<Var> codes;
    Var psi = tape.relu_bias_block(tape.matmul(pv.d1_sharp, w, /*ta=*/true), pv.enc_b[0]);
    codes.push_back(psi);
    for (size_t i = 0; i < pv.dicts.size(); ++i) {
        psi = tape.relu_bias_block(tape.kron_apply(pv.dicts[i], psi), pv.enc_b[i + 1]);
        codes.push_back(psi);
    }
    return codes;
}

std::pair<Var, Var> record_readout(Tape &tape, const ParamVars &pv, Var psi_cap_n) {
    const Mat &flat = tape.value(psi_cap_n);
    Var vec = tape.reshape(psi_cap_n, flat.size(), 1);
    Var psi_n = tape.matmul(pv.readout, vec);
    Var m = tape.block_combine(psi_cap_n, pv.cam_coeffs);
    return {psi_n, m};
}

std::pair<Var, Var> record_decode(Tape &tape, const ParamVars &pv, Var psi_n) {
    Var psi = psi_n;
    for (int i = static_cast<int>(pv.dicts.size()) - 1; i >= 0; --i) {
        psi = tape.relu_bias_elem(tape.matmul(pv.dicts[i], psi), pv.dec_b[i]);
    }
    Var d1 = tape.dai_reshape(pv.d1_sharp);
    Var s = tape.matmul(d1, psi);
    const int p = tape.value(pv.d1_sharp).rows();
    Var shape = tape.reshape(s, p, 3);
    return {s, shape};
}

ForwardVars record_forward(Tape &tape, const ParamVars &pv, Var w) {
    ForwardVars fv;
    fv.codes = record_encode(tape, pv, w);
    auto [psi_n, m_raw] = record_readout(tape, pv, fv.codes.back());
    fv.psi_n = psi_n;
    fv.m_raw = m_raw;
    if (polar_is_degenerate(tape.value(m_raw))) {
        fv.degenerate = true;
        return fv;
    }
    fv.m_tilde = tape.orthonormalize_3x2(m_raw);
    auto [s, shape] = record_decode(tape, pv, psi_n);
    fv.s_vec = s;
    fv.shape = shape;
    fv.loss = tape.frobenius_norm(tape.sub(w, tape.matmul(shape, fv.m_tilde)));
    return fv;
}

std::vector<BlockMatrix> encode(const Mat &w, const ModelParams &params) {
    params.validate();
    if (w.rows() != params.dims.p || w.cols() != 2) {
        throw ShapeError("encode: w must be p x 2");
    }
    Tape tape;
    ParamVars pv = register_params(tape, params);
    std::vector<Var> codes = record_encode(tape, pv, tape.input(w));
    std::vector<BlockMatrix> out;
    out.reserve(codes.size());
    for (Var c : codes) {
        out.emplace_back(tape.value(c));
    }
    return out;
}

std::pair<Mat, Mat> readout(const BlockMatrix &psi_cap_n, const ModelParams &params) {
    params.validate();
    if (psi_cap_n.block_count() != params.dims.k.back()) {
        throw ShapeError("readout: block count must equal k_n");
    }
    Tape tape;
    ParamVars pv = register_params(tape, params);
    auto [psi_n, m] = record_readout(tape, pv, tape.input(psi_cap_n.flat()));
    return {tape.value(psi_n), tape.value(m)};
}

std::pair<Mat, Mat> decode(const Mat &psi_n, const ModelParams &params) {
    params.validate();
    if (psi_n.rows() != params.dims.k.back() || psi_n.cols() != 1) {
        throw ShapeError("decode: psi_n must be k_n x 1");
    }
    Tape tape;
    ParamVars pv = register_params(tape, params);
    auto [s, shape] = record_decode(tape, pv, tape.input(psi_n));
    return {tape.value(s), tape.value(shape)};
}

ForwardResult forward(const Mat &w, const ModelParams &params) {
    params.validate();
    if (w.rows() != params.dims.p || w.cols() != 2) {
        throw ShapeError("forward: w must be p x 2");
    }
    Tape tape;
    ParamVars pv = register_params(tape, params);
    ForwardVars fv = record_forward(tape, pv, tape.input(w));

    ForwardResult out;
    for (Var c : fv.codes) {
        out.codes.emplace_back(tape.value(c));
    }
    out.psi_n = tape.value(fv.psi_n);
    out.m_raw = tape.value(fv.m_raw);
    out.degenerate = fv.degenerate;
    if (!fv.degenerate) {
        out.m_tilde = tape.value(fv.m_tilde);
        out.shape = tape.value(fv.shape);
        out.loss = tape.value(fv.loss)(0, 0);
        if (!all_finite(out.shape)) {
            throw NumericError("forward: non-finite shape");
        }
    }
    return out;
}

Mat sample_sparse_code(const ModelDims &dims, int max_active, Rng &rng) {
    const int kn = dims.k.back();
    if (max_active < 1 || max_active > kn) {
        throw ContractError("sample_sparse_code: max_active out of range");
    }
    const int active = 1 + static_cast<int>(rng.index(max_active));
    std::vector<int> idx(kn);
    for (int i = 0; i < kn; ++i) {
        idx[i] = i;
    }
    // partial Fisher-Yates for the first `active` slots
    for (int i = 0; i < active; ++i) {
        const int j = i + static_cast<int>(rng.index(kn - i));
        std::swap(idx[i], idx[j]);
    }
    Mat code(kn, 1);
    for (int i = 0; i < active; ++i) {
        code(idx[i], 0) = rng.uniform(0.5, 1.5);
    }
    return code;
}

std::vector<Mat> sample_planted_shapes(const ModelParams &params, int count,
                                       int max_active, Rng &rng) {
    std::vector<Mat> shapes;
    shapes.reserve(count);
    int guard = 0;
    while (static_cast<int>(shapes.size()) < count) {
        Mat code = sample_sparse_code(params.dims, max_active, rng);
        Mat shape = decode(code, params).second;
        if (frobenius_norm(shape) > 1e-6) {
            shapes.push_back(std::move(shape));
        } else if (++guard > 100 * count + 1000) {
            throw NumericError("sample_planted_shapes: decoder keeps producing zero shapes");
        }
    }
    return shapes;
}

} // namespace nrsfm
