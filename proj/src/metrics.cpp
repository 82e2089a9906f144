#include "nrsfm/metrics.hpp"

#include <cmath>
#include <ostream>

#include "nrsfm/model.hpp"
#include "nrsfm/sparse.hpp"

namespace nrsfm {

namespace {

// Frobenius inner product restricted to the reflected variant: negating the
// third column flips the sign of its contribution.
double dot_with_reflection(const Mat &r, const Mat &g, bool reflect) {
    double s = 0.0;
    for (int i = 0; i < r.rows(); ++i) {
        s += r(i, 0) * g(i, 0) + r(i, 1) * g(i, 1) +
             (reflect ? -r(i, 2) : r(i, 2)) * g(i, 2);
    }
    return s;
}

Mat reflect_z(const Mat &s) {
    Mat out = s;
    for (int i = 0; i < s.rows(); ++i) {
        out(i, 2) = -out(i, 2);
    }
    return out;
}

} // namespace

AlignedShapes align_for_eval(const std::vector<Mat> &recon, const std::vector<Mat> &gt) {
    if (recon.size() != gt.size()) {
        throw ShapeError("align_for_eval: list lengths differ");
    }
    AlignedShapes out;
    out.recon.reserve(recon.size());
    out.gt.reserve(gt.size());
    for (size_t i = 0; i < recon.size(); ++i) {
        if (recon[i].rows() != gt[i].rows() || recon[i].cols() != 3 || gt[i].cols() != 3) {
            throw ShapeError("align_for_eval: shapes must be p x 3 with matching p");
        }
        Mat r = center_shape(recon[i]);
        Mat g = center_shape(gt[i]);
        if (frobenius_norm(g) == 0.0) {
            throw ContractError("align_for_eval: zero-norm GT frame " + std::to_string(i));
        }
        // Reflection choice is scale-free: the variant with the larger inner
        // product wins for every positive common scale.
        if (dot_with_reflection(r, g, true) > dot_with_reflection(r, g, false)) {
            r = reflect_z(r);
        }
        out.recon.push_back(std::move(r));
        out.gt.push_back(std::move(g));
    }
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < out.recon.size(); ++i) {
        num += dot(out.recon[i], out.gt[i]);
        den += dot(out.recon[i], out.recon[i]);
    }
    out.global_scale = den > 0.0 ? num / den : 1.0;
    if (!(out.global_scale > 0.0)) {
        out.global_scale = 1.0; // anti-correlated or zero reconstruction
    }
    if (out.global_scale != 1.0) {
        for (auto &r : out.recon) {
            r = scale(r, out.global_scale);
        }
    }
    return out;
}

double shape_error_ratio(const std::vector<Mat> &recon, const std::vector<Mat> &gt) {
    if (recon.empty()) {
        throw ContractError("shape_error_ratio: empty lists");
    }
    AlignedShapes a = align_for_eval(recon, gt);
    double total = 0.0;
    for (size_t i = 0; i < a.recon.size(); ++i) {
        total += frobenius_norm(sub(a.recon[i], a.gt[i])) / frobenius_norm(a.gt[i]);
    }
    return total / static_cast<double>(a.recon.size());
}

double mean_point_distance(const std::vector<Mat> &recon, const std::vector<Mat> &gt) {
    if (recon.empty()) {
        throw ContractError("mean_point_distance: empty lists");
    }
    AlignedShapes a = align_for_eval(recon, gt);
    double total = 0.0;
    for (size_t i = 0; i < a.recon.size(); ++i) {
        const Mat &r = a.recon[i];
        const Mat &g = a.gt[i];
        double frame = 0.0;
        for (int pt = 0; pt < r.rows(); ++pt) {
            const double dx = r(pt, 0) - g(pt, 0);
            const double dy = r(pt, 1) - g(pt, 1);
            const double dz = r(pt, 2) - g(pt, 2);
            frame += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
        total += frame / r.rows();
    }
    return total / static_cast<double>(a.recon.size());
}

double reprojection_error(const Mat &w, const Mat &shape, const Mat &camera) {
    return frobenius_norm(sub(w, matmul(shape, camera)));
}

EvalReport evaluate(const Checkpoint &ckpt, const LandmarkDataset &dataset, int threads) {
    EvalReport report;
    report.coherence_final_dict = final_coherence(ckpt.params);
    if (dataset.frames.empty()) {
        return report;
    }
    if (dataset.p != ckpt.params.dims.p) {
        throw SchemaError("evaluate: dataset p does not match checkpoint");
    }

    const int count = static_cast<int>(dataset.frames.size());
    std::vector<ForwardResult> results(count);
    std::vector<std::string> errors(count);
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
#endif
    for (int i = 0; i < count; ++i) {
        try {
            results[i] = forward(dataset.frames[i].w, ckpt.params);
        } catch (const std::exception &ex) {
            errors[i] = ex.what();
        }
    }
    for (const auto &err : errors) {
        if (!err.empty()) {
            throw NumericError("evaluate: " + err);
        }
    }

    std::vector<Mat> recon, gt;
    bool all_gt = true;
    double reproj_sum = 0.0, reproj_ratio_sum = 0.0;
    int included = 0;
    for (int i = 0; i < count; ++i) {
        const ForwardResult &fr = results[i];
        if (fr.degenerate) {
            ++report.frames_degenerate;
            continue;
        }
        ++included;
        reproj_sum += fr.loss;
        const double wn = frobenius_norm(dataset.frames[i].w);
        reproj_ratio_sum += wn > 0.0 ? fr.loss / wn : 0.0;
        if (dataset.frames[i].gt_shape) {
            recon.push_back(fr.shape);
            gt.push_back(*dataset.frames[i].gt_shape);
        } else {
            all_gt = false;
        }
    }
    report.frames_evaluated = included;
    if (included > 0) {
        report.reprojection_error = reproj_sum / included;
        report.reprojection_error_ratio = reproj_ratio_sum / included;
    }
    if (all_gt && !recon.empty()) {
        report.has_3d = true;
        report.shape_error_ratio = shape_error_ratio(recon, gt);
        report.mean_point_distance = mean_point_distance(recon, gt);
    }
    return report;
}

void write_report(const EvalReport &report, std::ostream &out) {
    out << "frames_evaluated = " << report.frames_evaluated << "\n";
    out << "frames_degenerate = " << report.frames_degenerate << "\n";
    out << "reprojection_error = " << report.reprojection_error << "\n";
    out << "reprojection_error_ratio = " << report.reprojection_error_ratio << "\n";
    if (report.has_3d) {
        out << "shape_error_ratio = " << report.shape_error_ratio << "\n";
        out << "mean_point_distance = " << report.mean_point_distance << "\n";
    }
    out << "coherence_final_dict = " << report.coherence_final_dict << "\n";
}

} // namespace nrsfm
