#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nrsfm/mat.hpp"

namespace nrsfm {

struct LandmarkFrame {
    std::string id;
    Mat w;                        // p x 2 measurements
    std::optional<Mat> gt_shape;  // p x 3
    std::optional<Mat> gt_camera; // 3 x 2
    double offset_u = 0.0;        // column means removed by centering
    double offset_v = 0.0;
};

struct LandmarkDataset {
    int p = 0;
    std::vector<LandmarkFrame> frames;
};

/// Line-oriented landmark format, one frame per record:
///   frame <id> p=<count> [gt]
///   cam <m00> <m01> <m10> <m11> <m20> <m21>    (only when a GT camera exists)
///   <u> <v> [<x> <y> <z>]                      (p lines; xyz present iff gt)
/// '#' lines are comments. Floats are 64-bit decimal; save uses 17
/// significant digits so save -> load is an identity.
LandmarkDataset load_landmarks(const std::string &path, bool center = true);
void save_landmarks(const LandmarkDataset &dataset, const std::string &path);

/// Per frame: draw a random semi-orthonormal camera, center the shape,
/// project w = S M; stores the centered shape and the camera as GT.
LandmarkDataset synthesize_projections(const std::vector<Mat> &shapes, uint64_t seed);

/// Gaussian perturbation rescaled so that ||noise||_F = ratio * ||w||_F
/// per frame. GT is left untouched.
LandmarkDataset add_noise(const LandmarkDataset &dataset, double ratio, uint64_t seed);

/// Subtract per-frame column means of w; removed offsets accumulate in the
/// frame for reporting.
LandmarkDataset center_frames(const LandmarkDataset &dataset);

Mat center_shape(const Mat &s); // zero column means, any column count

/// Converter for the common mocap skeleton-per-row CSV layout: one frame per
/// line, 3p values x1 y1 z1 x2 y2 z2 ... separated by commas or whitespace.
std::vector<Mat> load_shapes_csv(const std::string &path);

/// Built-in generator: a Gaussian base cloud deformed by four sinusoidal
/// modes, giving smooth low-dimensional non-rigid motion.
std::vector<Mat> synthetic_deforming_shapes(int p, int frames, uint64_t seed);

} // namespace nrsfm
