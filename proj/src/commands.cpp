#include "nrsfm/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "nrsfm/data.hpp"
#include "nrsfm/metrics.hpp"
#include "nrsfm/model.hpp"
#include "nrsfm/sparse.hpp"
#include "nrsfm/training.hpp"

namespace nrsfm {

namespace {

std::string trim(const std::string &s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RunConfig::RunConfig(std::string command) : command_(std::move(command)) {
    values_["command"] = command_;
}

void RunConfig::define(const std::string &key, const std::string &default_value) {
    values_[key] = default_value;
}

void RunConfig::set(const std::string &key, const std::string &value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw UsageError("unknown configuration key '" + key + "' for command " + command_);
    }
    if (key == "command" && value != command_) {
        throw UsageError("config is for command '" + value + "', not '" + command_ + "'");
    }
    it->second = value;
}

void RunConfig::load_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file: " + path);
    }
    std::string line;
    int line_no = 0;
    std::string section; // empty = global
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        if (!section.empty() && section != command_) {
            continue; // another command's section
        }
        try {
            set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const UsageError &ex) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": " +
                             std::string(ex.what()));
        }
    }
}

std::string RunConfig::get(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw UsageError("missing configuration key '" + key + "'");
    }
    return it->second;
}

int RunConfig::get_int(const std::string &key) const {
    const std::string v = get(key);
    try {
        size_t pos = 0;
        const int out = std::stoi(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return out;
    } catch (const std::exception &) {
        throw UsageError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

double RunConfig::get_double(const std::string &key) const {
    const std::string v = get(key);
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return out;
    } catch (const std::exception &) {
        throw UsageError("key '" + key + "': expected number, got '" + v + "'");
    }
}

uint64_t RunConfig::get_seed(const std::string &key) const {
    const std::string v = get(key);
    try {
        size_t pos = 0;
        const uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return out;
    } catch (const std::exception &) {
        throw UsageError("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

bool RunConfig::get_bool(const std::string &key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw UsageError("key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> RunConfig::get_layers(const std::string &key) const {
    const std::string v = get(key);
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) {
            continue;
        }
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception &) {
            throw UsageError("key '" + key + "': bad layer width '" + tok + "'");
        }
    }
    if (out.empty()) {
        throw UsageError("key '" + key + "': at least one layer width required");
    }
    return out;
}

void RunConfig::write_manifest(const std::string &path) const {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write manifest: " + path);
    }
    out << "# run manifest; reproduce with: nrsfm " << command_ << " --config " << path << "\n";
    for (const auto &[key, value] : values_) {
        out << key << " = " << value << "\n";
    }
}

RunConfig make_synth_config() {
    RunConfig rc("synth");
    rc.define("out", "");
    rc.define("seed", "0");
    rc.define("frames", "100");
    rc.define("points", "15");
    rc.define("noise", "0");
    rc.define("source", "builtin"); // builtin | planted | csv
    rc.define("source_csv", "");
    rc.define("layers", "32,8");    // planted source
    rc.define("max_active", "2");   // planted source
    return rc;
}

RunConfig make_train_config() {
    RunConfig rc("train");
    rc.define("dataset", "");
    rc.define("out", "");
    rc.define("seed", "0");
    rc.define("layers", "32,8");
    rc.define("epochs", "50");
    rc.define("batch_size", "64");
    rc.define("lr", "0.001");
    rc.define("optimizer", "adam");
    rc.define("log_every", "10");
    rc.define("coherence_every", "50");
    rc.define("threads", "1");
    rc.define("center", "true");
    return rc;
}

RunConfig make_reconstruct_config() {
    RunConfig rc("reconstruct");
    rc.define("checkpoint", "");
    rc.define("dataset", "");
    rc.define("out", "");
    rc.define("json_out", "");
    rc.define("threads", "1");
    rc.define("center", "true");
    rc.define("seed", "0"); // unused; kept so shared config files stay valid
    return rc;
}

RunConfig make_eval_config() {
    RunConfig rc("eval");
    rc.define("checkpoint", "");
    rc.define("dataset", "");
    rc.define("out", "");
    rc.define("json_out", "");
    rc.define("threads", "1");
    rc.define("center", "true");
    rc.define("seed", "0");
    return rc;
}

RunConfig make_coherence_config() {
    RunConfig rc("coherence");
    rc.define("checkpoint", "");
    rc.define("out", "");
    return rc;
}

uint64_t fnv1a_file_checksum(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open file for checksum: " + path);
    }
    uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) {
            break;
        }
    }
    return h;
}

namespace {

std::string require_path(const RunConfig &cfg, const std::string &key) {
    const std::string v = cfg.get(key);
    if (v.empty()) {
        throw UsageError("command " + cfg.command() + " requires --" + key);
    }
    return v;
}

TrainConfig train_config_from(const RunConfig &cfg, int p) {
    TrainConfig tc;
    tc.dims.p = p;
    tc.dims.k = cfg.get_layers("layers");
    tc.batch_size = cfg.get_int("batch_size");
    tc.epochs = cfg.get_int("epochs");
    tc.learning_rate = cfg.get_double("lr");
    const std::string opt = cfg.get("optimizer");
    if (opt == "adam") {
        tc.optimizer = Optimizer::Adam;
    } else if (opt == "sgd") {
        tc.optimizer = Optimizer::Sgd;
    } else {
        throw UsageError("optimizer must be adam or sgd, got '" + opt + "'");
    }
    tc.seed = cfg.get_seed("seed");
    tc.log_every = cfg.get_int("log_every");
    tc.coherence_every = cfg.get_int("coherence_every");
    tc.threads = cfg.get_int("threads");
    return tc;
}

} // namespace

int cmd_synth(const RunConfig &cfg) {
    const std::string out = require_path(cfg, "out");
    const uint64_t seed = cfg.get_seed("seed");
    const int frames = cfg.get_int("frames");
    const int points = cfg.get_int("points");
    const double noise = cfg.get_double("noise");
    const std::string source = cfg.get("source");

    std::vector<Mat> shapes;
    if (source == "builtin") {
        shapes = synthetic_deforming_shapes(points, frames, seed);
    } else if (source == "planted") {
        ModelDims dims;
        dims.p = points;
        dims.k = cfg.get_layers("layers");
        ModelParams planted = init_params(dims, seed);
        Rng rng(seed);
        shapes = sample_planted_shapes(planted, frames, cfg.get_int("max_active"), rng);
    } else if (source == "csv") {
        shapes = load_shapes_csv(require_path(cfg, "source_csv"));
        if (frames > 0 && static_cast<int>(shapes.size()) > frames) {
            shapes.resize(frames);
        }
        if (shapes.empty()) {
            throw SchemaError("source csv contains no frames");
        }
    } else {
        throw UsageError("source must be builtin, planted or csv; got '" + source + "'");
    }

    LandmarkDataset ds = synthesize_projections(shapes, seed + 1);
    if (noise > 0.0) {
        ds = add_noise(ds, noise, seed + 2);
    }
    save_landmarks(ds, out);
    cfg.write_manifest(out + ".manifest");
    std::cout << "frames = " << ds.frames.size() << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file_checksum(out)));
    std::cout << "checksum = " << hex << "\n";
    return 0;
}

int cmd_train(const RunConfig &cfg) {
    const std::string dataset_path = require_path(cfg, "dataset");
    const std::string out = require_path(cfg, "out");
    LandmarkDataset ds = load_landmarks(dataset_path, cfg.get_bool("center"));
    if (ds.frames.empty()) {
        throw SchemaError("train: dataset has no frames");
    }
    TrainConfig tc = train_config_from(cfg, ds.p);
    cfg.write_manifest(out + ".manifest");

    TrainResult tr = train(ds, tc, {}, &std::cout);
    save_checkpoint(tr.checkpoint, out);
    if (tr.aborted) {
        std::cerr << "training aborted at step " << tr.abort_step
                  << "; last good checkpoint written to " << out << "\n";
        return 3;
    }
    std::cout << "steps = " << tr.checkpoint.step << "\n";
    if (!tr.checkpoint.loss_history.empty()) {
        std::cout << "final_loss = " << tr.checkpoint.loss_history.back().value << "\n";
    }
    std::cout << "final_coherence = " << final_coherence(tr.checkpoint.params) << "\n";
    return 0;
}

int cmd_reconstruct(const RunConfig &cfg) {
    const std::string ckpt_path = require_path(cfg, "checkpoint");
    const std::string dataset_path = require_path(cfg, "dataset");
    const std::string out = require_path(cfg, "out");
    Checkpoint ck = load_checkpoint(ckpt_path);
    LandmarkDataset ds = load_landmarks(dataset_path, cfg.get_bool("center"));
    if (!ds.frames.empty() && ds.p != ck.params.dims.p) {
        throw SchemaError("reconstruct: dataset p=" + std::to_string(ds.p) +
                          " does not match checkpoint p=" +
                          std::to_string(ck.params.dims.p));
    }
    const int threads = cfg.get_int("threads");

    const int count = static_cast<int>(ds.frames.size());
    std::vector<ForwardResult> results(count);
    std::vector<std::string> errors(count);
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
#endif
    for (int i = 0; i < count; ++i) {
        try {
            results[i] = forward(ds.frames[i].w, ck.params);
        } catch (const std::exception &ex) {
            errors[i] = ex.what();
        }
    }
    for (const auto &err : errors) {
        if (!err.empty()) {
            throw NumericError("reconstruct: " + err);
        }
    }

    std::ofstream fout(out);
    if (!fout) {
        throw ParseError("cannot write reconstruction file: " + out);
    }
    for (int i = 0; i < count; ++i) {
        const auto &frame = ds.frames[i];
        const auto &fr = results[i];
        if (fr.degenerate) {
            fout << "frame " << frame.id << " p=" << ds.p << " degenerate\n";
            continue;
        }
        fout << "frame " << frame.id << " p=" << ds.p << " recon\n";
        fout << "cam";
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                fout << ' ' << format_double(fr.m_tilde(r, c));
            }
        }
        fout << "\n";
        for (int r = 0; r < ds.p; ++r) {
            fout << format_double(fr.shape(r, 0)) << ' ' << format_double(fr.shape(r, 1))
                 << ' ' << format_double(fr.shape(r, 2)) << "\n";
        }
    }
    fout.close();

    const std::string json_out = cfg.get("json_out");
    if (!json_out.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < count; ++i) {
            const auto &fr = results[i];
            nlohmann::json rec;
            rec["id"] = ds.frames[i].id;
            rec["degenerate"] = fr.degenerate;
            if (!fr.degenerate) {
                nlohmann::json cam = nlohmann::json::array();
                for (int r = 0; r < 3; ++r) {
                    cam.push_back({fr.m_tilde(r, 0), fr.m_tilde(r, 1)});
                }
                rec["camera"] = cam;
                nlohmann::json shape = nlohmann::json::array();
                for (int r = 0; r < ds.p; ++r) {
                    shape.push_back({fr.shape(r, 0), fr.shape(r, 1), fr.shape(r, 2)});
                }
                rec["shape"] = shape;
            }
            arr.push_back(std::move(rec));
        }
        std::ofstream jout(json_out);
        jout << arr.dump(2) << "\n";
    }

    cfg.write_manifest(out + ".manifest");
    std::cout << "frames = " << count << "\n";
    return 0;
}

int cmd_eval(const RunConfig &cfg) {
    const std::string ckpt_path = require_path(cfg, "checkpoint");
    const std::string dataset_path = require_path(cfg, "dataset");
    const std::string out = require_path(cfg, "out");
    Checkpoint ck = load_checkpoint(ckpt_path);
    LandmarkDataset ds = load_landmarks(dataset_path, cfg.get_bool("center"));
    EvalReport report = evaluate(ck, ds, cfg.get_int("threads"));

    if (!report.has_3d) {
        std::cout << "note: no ground truth in dataset, 3D metrics omitted\n";
    }
    write_report(report, std::cout);
    std::ofstream fout(out);
    if (!fout) {
        throw ParseError("cannot write report: " + out);
    }
    write_report(report, fout);
    fout.close();

    const std::string json_out = cfg.get("json_out");
    if (!json_out.empty()) {
        nlohmann::json j;
        j["frames_evaluated"] = report.frames_evaluated;
        j["frames_degenerate"] = report.frames_degenerate;
        j["reprojection_error"] = report.reprojection_error;
        j["reprojection_error_ratio"] = report.reprojection_error_ratio;
        j["coherence_final_dict"] = report.coherence_final_dict;
        if (report.has_3d) {
            j["shape_error_ratio"] = report.shape_error_ratio;
            j["mean_point_distance"] = report.mean_point_distance;
        }
        std::ofstream jout(json_out);
        jout << j.dump(2) << "\n";
    }
    cfg.write_manifest(out + ".manifest");
    return 0;
}

int cmd_coherence(const RunConfig &cfg) {
    const std::string ckpt_path = require_path(cfg, "checkpoint");
    Checkpoint ck = load_checkpoint(ckpt_path);
    const ModelParams &params = ck.params;

    std::ostringstream os;
    Mat d1 = dai_reshape_to_d1(params.d1_sharp);
    os << "coherence_d1 = " << mutual_coherence(d1) << "\n";
    Mat composed = d1;
    for (size_t i = 0; i < params.dicts.size(); ++i) {
        os << "coherence_d" << (i + 2) << " = " << mutual_coherence(params.dicts[i]) << "\n";
        composed = matmul(composed, params.dicts[i]);
    }
    os << "coherence_final = " << final_coherence(params) << "\n";
    os << "coherence_composed = " << mutual_coherence(composed) << "\n";

    std::cout << os.str();
    std::string out = cfg.get("out");
    if (out.empty()) {
        out = ckpt_path + ".coherence";
    }
    std::ofstream fout(out);
    if (!fout) {
        throw ParseError("cannot write coherence report: " + out);
    }
    fout << os.str();
    fout.close();
    cfg.write_manifest(out + ".manifest");
    return 0;
}

} // namespace nrsfm
