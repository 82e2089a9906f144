#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nrsfm/autodiff.hpp"
#include "nrsfm/mat.hpp"
#include "nrsfm/rng.hpp"

namespace nrsfm {

struct ModelDims {
    int p = 0;              // landmark count
    std::vector<int> k;     // layer widths k_1 .. k_n, n >= 1

    int n() const { return static_cast<int>(k.size()); }
    void validate() const;
    bool operator==(const ModelDims &) const = default;
};

/// All learnable tensors. Dictionaries are shared between the encoder and
/// the decoder (one parameter set).
struct ModelParams {
    ModelDims dims;
    Mat d1_sharp;                    // p x 3k_1 (Dai-style reshape of D_1)
    std::vector<Mat> dicts;          // D_2 .. D_n, D_i: k_{i-1} x k_i
    std::vector<Mat> enc_thresholds; // b_1 .. b_n, each k_i x 1, >= 0
    std::vector<Mat> dec_thresholds; // b'_2 .. b'_n, each k_{i-1} x 1, >= 0
    Mat readout;                     // k_n x 6k_n dense map from vec(Psi_n)
    Mat cam_coeffs;                  // k_n x 1 block-combination coefficients

    /// Fixed tensor order used by the optimizer and the checkpoint layout:
    /// d1_sharp, D_2..D_n, b_1..b_n, b'_2..b'_n, readout, cam_coeffs.
    std::vector<Mat *> tensors();
    std::vector<const Mat *> tensors() const;
    std::vector<std::string> tensor_names() const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Tape builders (training path). The pure functions below wrap these, so
// there is exactly one implementation of the architecture.
// ---------------------------------------------------------------------------

struct ParamVars {
    Var d1_sharp;
    std::vector<Var> dicts;
    std::vector<Var> enc_b;
    std::vector<Var> dec_b;
    Var readout;
    Var cam_coeffs;

    /// Same order as ModelParams::tensors().
    std::vector<Var> all() const;
};

ParamVars register_params(Tape &tape, const ModelParams &params);

std::vector<Var> record_encode(Tape &tape, const ParamVars &pv, Var w);
std::pair<Var, Var> record_readout(Tape &tape, const ParamVars &pv, Var psi_cap_n);
std::pair<Var, Var> record_decode(Tape &tape, const ParamVars &pv, Var psi_n);

struct ForwardVars {
    std::vector<Var> codes; // flat (3k_i) x 2 per layer
    Var psi_n;
    Var m_raw;
    bool degenerate = false; // sigma_min(m_raw) at or below the polar threshold
    Var m_tilde;             // invalid when degenerate
    Var s_vec;               // 3p x 1
    Var shape;               // p x 3
    Var loss;                // ||w - S m_tilde||_F, invalid when degenerate
};

/// Full graph: encode -> readout -> orthonormalize -> decode -> loss.
/// Inputs are expected to be centered per frame (data-io does this).
ForwardVars record_forward(Tape &tape, const ParamVars &pv, Var w);

// ---------------------------------------------------------------------------
// Pure inference path
// ---------------------------------------------------------------------------

struct ForwardResult {
    std::vector<BlockMatrix> codes;
    Mat psi_n;
    Mat m_raw;
    Mat m_tilde;
    Mat shape;
    double loss = 0.0;
    bool degenerate = false; // m_tilde/shape/loss unset when true
};

std::vector<BlockMatrix> encode(const Mat &w, const ModelParams &params);
std::pair<Mat, Mat> readout(const BlockMatrix &psi_cap_n, const ModelParams &params);
std::pair<Mat, Mat> decode(const Mat &psi_n, const ModelParams &params); // (s, shape)
ForwardResult forward(const Mat &w, const ModelParams &params);

// ---------------------------------------------------------------------------
// Planted-model data generation
// ---------------------------------------------------------------------------

/// Nonnegative k_n vector with 1..max_active active entries in [0.5, 1.5).
Mat sample_sparse_code(const ModelDims &dims, int max_active, Rng &rng);

/// Sample sparse codes and decode them to p x 3 shapes; degenerate
/// (near-zero) decodes are resampled.
std::vector<Mat> sample_planted_shapes(const ModelParams &params, int count,
                                       int max_active, Rng &rng);

} // namespace nrsfm
