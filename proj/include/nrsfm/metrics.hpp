#pragma once

#include <iosfwd>
#include <vector>

#include "nrsfm/data.hpp"
#include "nrsfm/mat.hpp"
#include "nrsfm/training.hpp"

namespace nrsfm {

struct EvalReport {
    double shape_error_ratio = 0.0;
    double mean_point_distance = 0.0;
    double reprojection_error = 0.0;       // mean per-frame ||w - S M~||_F
    double reprojection_error_ratio = 0.0; // mean per-frame ratio to ||w||_F
    double coherence_final_dict = 0.0;
    int frames_evaluated = 0;
    int frames_degenerate = 0;
    bool has_3d = false; // shape metrics present (GT available)
};

/// Both shape lists centered per frame, then the weakly observable
/// ambiguities are resolved before comparison: per-frame depth reflection
/// (keep the lower-error variant) and one global least-squares scale for the
/// whole dataset. No Procrustes rotation beyond that.
struct AlignedShapes {
    std::vector<Mat> recon; // centered, reflected, scaled
    std::vector<Mat> gt;    // centered
    double global_scale = 1.0;
};
AlignedShapes align_for_eval(const std::vector<Mat> &recon, const std::vector<Mat> &gt);

/// mean over frames of ||S - S_hat||_F / ||S_hat||_F after alignment.
double shape_error_ratio(const std::vector<Mat> &recon, const std::vector<Mat> &gt);

/// mean over frames of (1/p) sum_i ||S_i - S_hat_i||_2 after alignment;
/// units follow the GT shapes.
double mean_point_distance(const std::vector<Mat> &recon, const std::vector<Mat> &gt);

/// ||w - shape * camera||_F
double reprojection_error(const Mat &w, const Mat &shape, const Mat &camera);

/// Forward every frame against the checkpoint parameters and aggregate all
/// metrics. Frames run in parallel when threads > 1; the reduction order is
/// fixed, so the report is identical for any thread count.
EvalReport evaluate(const Checkpoint &ckpt, const LandmarkDataset &dataset,
                    int threads = 1);

/// Flat key = value rendering (same text goes to file and stdout).
void write_report(const EvalReport &report, std::ostream &out);

} // namespace nrsfm
