#include "nrsfm/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nrsfm/rng.hpp"

namespace nrsfm {

namespace {

void append_double(std::string &line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += buf;
}

double parse_double(const std::string &tok, int line_no) {
    char *end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
    if (!std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
    }
    return v;
}

std::vector<std::string> split_ws(const std::string &line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) {
        toks.push_back(t);
    }
    return toks;
}

} // namespace

LandmarkDataset load_landmarks(const std::string &path, bool center) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open landmark file: " + path);
    }
    LandmarkDataset ds;
    std::string line;
    int line_no = 0;

    auto next_content_line = [&](std::string &out) -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') {
                continue;
            }
            out = line;
            return true;
        }
        return false;
    };

    std::string content;
    while (next_content_line(content)) {
        auto toks = split_ws(content);
        if (toks.empty() || toks[0] != "frame") {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'frame' header");
        }
        if (toks.size() < 3 || toks[2].rfind("p=", 0) != 0) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": frame header needs '<id> p=<count>'");
        }
        LandmarkFrame frame;
        frame.id = toks[1];
        const int p = std::atoi(toks[2].c_str() + 2);
        if (p <= 0) {
            throw ParseError("line " + std::to_string(line_no) + ": bad point count");
        }
        bool has_gt = false;
        for (size_t i = 3; i < toks.size(); ++i) {
            if (toks[i] == "gt") {
                has_gt = true;
            } else {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": unknown header token '" + toks[i] + "'");
            }
        }
        if (ds.p == 0) {
            ds.p = p;
        } else if (p != ds.p) {
            throw SchemaError("frame " + frame.id + ": point count " + std::to_string(p) +
                              " does not match dataset p=" + std::to_string(ds.p));
        }

        // optional camera line, then p landmark lines
        std::streampos before = in.tellg();
        int before_no = line_no;
        if (!next_content_line(content)) {
            throw ParseError("line " + std::to_string(line_no) + ": truncated frame " + frame.id);
        }
        auto body = split_ws(content);
        if (!body.empty() && body[0] == "cam") {
            if (body.size() != 7) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": cam line needs 6 values");
            }
            Mat cam(3, 2);
            for (int i = 0; i < 6; ++i) {
                cam(i / 2, i % 2) = parse_double(body[i + 1], line_no);
            }
            frame.gt_camera = cam;
        } else {
            in.seekg(before);
            line_no = before_no;
        }

        Mat w(p, 2);
        Mat gt(p, 3);
        for (int r = 0; r < p; ++r) {
            if (!next_content_line(content)) {
                throw ParseError("line " + std::to_string(line_no) + ": truncated frame " +
                                 frame.id);
            }
            auto vals = split_ws(content);
            const size_t want = has_gt ? 5 : 2;
            if (vals.size() != want) {
                throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(want) + " values, got " +
                                 std::to_string(vals.size()));
            }
            w(r, 0) = parse_double(vals[0], line_no);
            w(r, 1) = parse_double(vals[1], line_no);
            if (has_gt) {
                gt(r, 0) = parse_double(vals[2], line_no);
                gt(r, 1) = parse_double(vals[3], line_no);
                gt(r, 2) = parse_double(vals[4], line_no);
            }
        }
        frame.w = std::move(w);
        if (has_gt) {
            frame.gt_shape = std::move(gt);
        }
        ds.frames.push_back(std::move(frame));
    }
    return center ? center_frames(ds) : ds;
}

void save_landmarks(const LandmarkDataset &dataset, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write landmark file: " + path);
    }
    for (const auto &frame : dataset.frames) {
        std::string header = "frame " + frame.id + " p=" + std::to_string(dataset.p);
        if (frame.gt_shape) {
            header += " gt";
        }
        out << header << "\n";
        if (frame.gt_camera) {
            std::string cam = "cam";
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 2; ++c) {
                    cam += ' ';
                    append_double(cam, (*frame.gt_camera)(r, c));
                }
            }
            out << cam << "\n";
        }
        for (int r = 0; r < dataset.p; ++r) {
            std::string row;
            append_double(row, frame.w(r, 0));
            row += ' ';
            append_double(row, frame.w(r, 1));
            if (frame.gt_shape) {
                for (int c = 0; c < 3; ++c) {
                    row += ' ';
                    append_double(row, (*frame.gt_shape)(r, c));
                }
            }
            out << row << "\n";
        }
    }
    if (!out) {
        throw ParseError("write failed: " + path);
    }
}

Mat center_shape(const Mat &s) {
    Mat out = s;
    for (int c = 0; c < s.cols(); ++c) {
        double mean = 0.0;
        for (int r = 0; r < s.rows(); ++r) {
            mean += s(r, c);
        }
        mean /= s.rows();
        for (int r = 0; r < s.rows(); ++r) {
            out(r, c) -= mean;
        }
    }
    return out;
}

LandmarkDataset synthesize_projections(const std::vector<Mat> &shapes, uint64_t seed) {
    if (shapes.empty()) {
        throw ContractError("synthesize_projections: no shapes");
    }
    const int p = shapes[0].rows();
    Rng rng(seed);
    LandmarkDataset ds;
    ds.p = p;
    ds.frames.reserve(shapes.size());
    for (size_t i = 0; i < shapes.size(); ++i) {
        if (shapes[i].rows() != p || shapes[i].cols() != 3) {
            throw SchemaError("synthesize_projections: shape " + std::to_string(i) +
                              " is not p x 3");
        }
        LandmarkFrame frame;
        frame.id = std::to_string(i);
        Mat centered = center_shape(shapes[i]);
        Mat cam = random_semiorthonormal_3x2(rng);
        frame.w = matmul(centered, cam);
        frame.gt_shape = std::move(centered);
        frame.gt_camera = std::move(cam);
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

LandmarkDataset add_noise(const LandmarkDataset &dataset, double ratio, uint64_t seed) {
    if (ratio < 0.0) {
        throw ContractError("add_noise: ratio must be nonnegative");
    }
    LandmarkDataset out = dataset;
    if (ratio == 0.0) {
        return out;
    }
    Rng rng(seed);
    for (auto &frame : out.frames) {
        Mat noise = random_gaussian(frame.w.rows(), 2, rng);
        const double wn = frobenius_norm(frame.w);
        const double nn = frobenius_norm(noise);
        if (wn == 0.0 || nn == 0.0) {
            continue;
        }
        const double f = ratio * wn / nn;
        for (int i = 0; i < frame.w.size(); ++i) {
            frame.w.data()[i] += f * noise.data()[i];
        }
    }
    return out;
}

LandmarkDataset center_frames(const LandmarkDataset &dataset) {
    LandmarkDataset out = dataset;
    for (auto &frame : out.frames) {
        double mu = 0.0, mv = 0.0;
        for (int r = 0; r < frame.w.rows(); ++r) {
            mu += frame.w(r, 0);
            mv += frame.w(r, 1);
        }
        mu /= frame.w.rows();
        mv /= frame.w.rows();
        for (int r = 0; r < frame.w.rows(); ++r) {
            frame.w(r, 0) -= mu;
            frame.w(r, 1) -= mv;
        }
        frame.offset_u += mu;
        frame.offset_v += mv;
    }
    return out;
}

std::vector<Mat> load_shapes_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open shapes file: " + path);
    }
    std::vector<Mat> shapes;
    std::string line;
    int line_no = 0;
    int p = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char &ch : line) {
            if (ch == ',') {
                ch = ' ';
            }
        }
        auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#') {
            continue;
        }
        if (toks.size() % 3 != 0) {
            throw SchemaError("line " + std::to_string(line_no) +
                              ": value count not a multiple of 3");
        }
        const int row_p = static_cast<int>(toks.size() / 3);
        if (p == 0) {
            p = row_p;
        } else if (row_p != p) {
            throw SchemaError("line " + std::to_string(line_no) + ": frame has " +
                              std::to_string(row_p) + " points, expected " + std::to_string(p));
        }
        Mat s(p, 3);
        for (int i = 0; i < p * 3; ++i) {
            s.data()[i] = parse_double(toks[i], line_no);
        }
        shapes.push_back(std::move(s));
    }
    return shapes;
}

std::vector<Mat> synthetic_deforming_shapes(int p, int frames, uint64_t seed) {
    if (p <= 0 || frames < 0) {
        throw ContractError("synthetic_deforming_shapes: bad p or frame count");
    }
    Rng rng(seed);
    Mat base = random_gaussian(p, 3, rng);
    const int n_modes = 4;
    std::vector<Mat> modes;
    std::vector<double> phase;
    for (int m = 0; m < n_modes; ++m) {
        modes.push_back(random_gaussian(p, 3, rng, 0.5));
        phase.push_back(rng.uniform(0.0, 6.283185307179586));
    }
    std::vector<Mat> shapes;
    shapes.reserve(frames);
    for (int t = 0; t < frames; ++t) {
        Mat s = base;
        for (int m = 0; m < n_modes; ++m) {
            const double a =
                std::sin(6.283185307179586 * (m + 1) * t / std::max(frames, 1) + phase[m]);
            for (int i = 0; i < s.size(); ++i) {
                s.data()[i] += a * modes[m].data()[i];
            }
        }
        shapes.push_back(std::move(s));
    }
    return shapes;
}

} // namespace nrsfm
