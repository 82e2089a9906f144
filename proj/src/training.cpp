#include "nrsfm/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nrsfm/sparse.hpp"

namespace nrsfm {

void TrainConfig::validate() const {
    dims.validate();
    if (batch_size < 1) {
        throw ContractError("TrainConfig: batch_size must be >= 1");
    }
    if (epochs < 0) {
        throw ContractError("TrainConfig: epochs must be >= 0");
    }
    if (!(learning_rate > 0.0)) {
        throw ContractError("TrainConfig: learning_rate must be positive");
    }
    if (log_every < 1 || coherence_every < 1) {
        throw ContractError("TrainConfig: logging cadences must be >= 1");
    }
    if (threads < 1) {
        throw ContractError("TrainConfig: threads must be >= 1");
    }
}

ModelParams init_params(const ModelDims &dims, uint64_t seed) {
    dims.validate();
    Rng rng(seed);
    ModelParams params;
    params.dims = dims;
    const int n = dims.n();

    Mat d1 = random_gaussian(3 * dims.p, dims.k[0], rng, 1.0 / std::sqrt(3.0 * dims.p));
    params.d1_sharp = dai_reshape_to_sharp(d1, dims.p);
    for (int i = 1; i < n; ++i) {
        params.dicts.push_back(
            random_gaussian(dims.k[i - 1], dims.k[i], rng, 1.0 / std::sqrt(dims.k[i - 1])));
    }
    for (int i = 0; i < n; ++i) {
        Mat b(dims.k[i], 1);
        for (int j = 0; j < b.size(); ++j) {
            b.data()[j] = 0.01;
        }
        params.enc_thresholds.push_back(std::move(b));
    }
    for (int i = 1; i < n; ++i) {
        Mat b(dims.k[i - 1], 1);
        for (int j = 0; j < b.size(); ++j) {
            b.data()[j] = 0.01;
        }
        params.dec_thresholds.push_back(std::move(b));
    }
    const int kn = dims.k.back();
    params.readout = random_gaussian(kn, 6 * kn, rng, 1.0 / std::sqrt(6.0 * kn));
    params.cam_coeffs = random_gaussian(kn, 1, rng, 1.0 / std::sqrt(kn));
    params.validate();
    return params;
}

Mat final_dictionary(const ModelParams &params) {
    if (params.dicts.empty()) {
        return dai_reshape_to_d1(params.d1_sharp);
    }
    return params.dicts.back();
}

double final_coherence(const ModelParams &params) {
    return mutual_coherence(final_dictionary(params));
}

namespace {

struct FrameWork {
    bool degenerate = false;
    double loss = 0.0;
    std::vector<Mat> grads;
    std::string error;
};

FrameWork frame_gradients(const Mat &w, const ModelParams &params) {
    FrameWork fw;
    try {
        Tape tape;
        ParamVars pv = register_params(tape, params);
        ForwardVars fv = record_forward(tape, pv, tape.input(w));
        if (fv.degenerate) {
            fw.degenerate = true;
            return fw;
        }
        fw.loss = tape.value(fv.loss)(0, 0);
        fw.grads = tape.grad(fv.loss, pv.all());
    } catch (const std::exception &ex) {
        fw.error = ex.what();
    }
    return fw;
}

BatchGrads reduce_in_order(std::vector<FrameWork> &work) {
    BatchGrads out;
    for (auto &fw : work) {
        if (!fw.error.empty()) {
            throw NumericError("batch_gradients: " + fw.error);
        }
        if (fw.degenerate) {
            ++out.degenerate;
            continue;
        }
        if (out.included == 0) {
            out.grads = std::move(fw.grads);
            out.mean_loss = fw.loss;
        } else {
            for (size_t t = 0; t < out.grads.size(); ++t) {
                out.grads[t] = add(out.grads[t], fw.grads[t]);
            }
            out.mean_loss += fw.loss;
        }
        ++out.included;
    }
    if (out.included > 0) {
        const double inv = 1.0 / out.included;
        out.mean_loss *= inv;
        for (auto &g : out.grads) {
            g = scale(g, inv);
        }
    }
    return out;
}

} // namespace

BatchGrads batch_gradients_serial(const std::vector<const Mat *> &frames,
                                  const ModelParams &params) {
    std::vector<FrameWork> work(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        work[i] = frame_gradients(*frames[i], params);
    }
    return reduce_in_order(work);
}

BatchGrads batch_gradients_parallel(const std::vector<const Mat *> &frames,
                                    const ModelParams &params, int threads) {
    std::vector<FrameWork> work(frames.size());
    const int count = static_cast<int>(frames.size());
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
#endif
    for (int i = 0; i < count; ++i) {
        work[i] = frame_gradients(*frames[i], params);
    }
    return reduce_in_order(work);
}

BatchGrads batch_gradients(const std::vector<const Mat *> &frames,
                           const ModelParams &params, int threads) {
    if (threads <= 1) {
        return batch_gradients_serial(frames, params);
    }
    return batch_gradients_parallel(frames, params, threads);
}

namespace {

void ensure_opt_state(OptState &opt, const ModelParams &params, const TrainConfig &cfg) {
    if (cfg.optimizer != Optimizer::Adam) {
        return;
    }
    if (!opt.m.empty()) {
        return;
    }
    for (const Mat *t : params.tensors()) {
        opt.m.emplace_back(t->rows(), t->cols());
        opt.v.emplace_back(t->rows(), t->cols());
    }
}

void clamp_thresholds(ModelParams &params) {
    auto clamp = [](Mat &b) {
        for (int i = 0; i < b.size(); ++i) {
            if (b.data()[i] < 0.0) {
                b.data()[i] = 0.0;
            }
        }
    };
    for (auto &b : params.enc_thresholds) {
        clamp(b);
    }
    for (auto &b : params.dec_thresholds) {
        clamp(b);
    }
}

} // namespace

StepResult train_step(const std::vector<const Mat *> &batch, ModelParams &params,
                      OptState &opt, const TrainConfig &cfg) {
    cfg.validate();
    if (batch.empty()) {
        throw ContractError("train_step: empty batch");
    }
    BatchGrads bg = batch_gradients(batch, params, cfg.threads);
    StepResult res;
    res.degenerate = bg.degenerate;
    if (bg.included == 0) {
        std::cerr << "warning: train_step skipped, all " << batch.size()
                  << " frames have degenerate cameras\n";
        res.skipped = true;
        return res;
    }
    res.mean_loss = bg.mean_loss;

    std::vector<Mat *> tensors = params.tensors();
    if (cfg.optimizer == Optimizer::Adam) {
        ensure_opt_state(opt, params, cfg);
        opt.step += 1;
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
        for (size_t t = 0; t < tensors.size(); ++t) {
            Mat &theta = *tensors[t];
            Mat &m = opt.m[t];
            Mat &v = opt.v[t];
            const Mat &g = bg.grads[t];
            for (int i = 0; i < theta.size(); ++i) {
                m.data()[i] = b1 * m.data()[i] + (1.0 - b1) * g.data()[i];
                v.data()[i] = b2 * v.data()[i] + (1.0 - b2) * g.data()[i] * g.data()[i];
                const double mhat = m.data()[i] / bc1;
                const double vhat = v.data()[i] / bc2;
                theta.data()[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            }
        }
    } else {
        opt.step += 1;
        for (size_t t = 0; t < tensors.size(); ++t) {
            Mat &theta = *tensors[t];
            const Mat &g = bg.grads[t];
            for (int i = 0; i < theta.size(); ++i) {
                theta.data()[i] -= cfg.learning_rate * g.data()[i];
            }
        }
    }
    clamp_thresholds(params);
    return res;
}

TrainResult train(const LandmarkDataset &dataset, const TrainConfig &cfg,
                  const TrainObserver &observer, std::ostream *log) {
    cfg.validate();
    if (dataset.frames.empty()) {
        throw ContractError("train: empty dataset");
    }
    if (dataset.p != cfg.dims.p) {
        throw SchemaError("train: dataset has p=" + std::to_string(dataset.p) +
                          " but model expects p=" + std::to_string(cfg.dims.p));
    }

    TrainResult result;
    Checkpoint &ck = result.checkpoint;
    ck.params = init_params(cfg.dims, cfg.seed);

    // distinct stream from parameter initialization
    Rng shuffle_rng(cfg.seed + 0x517cc1b727220a95ULL);
    std::vector<int> order(dataset.frames.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
    }

    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const Mat *> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                batch.push_back(&dataset.frames[order[i]].w);
            }

            ModelParams before = ck.params;
            OptState opt_before = ck.opt;
            StepResult sr = train_step(batch, ck.params, ck.opt, cfg);
            ++step;

            bool bad = !sr.skipped && !std::isfinite(sr.mean_loss);
            if (!bad) {
                for (const Mat *t : ck.params.tensors()) {
                    if (!all_finite(*t)) {
                        bad = true;
                        break;
                    }
                }
            }
            if (bad) {
                std::cerr << "warning: non-finite loss or parameters at step " << step
                          << ", aborting with last good checkpoint\n";
                ck.params = std::move(before);
                ck.opt = std::move(opt_before);
                ck.step = step - 1;
                result.aborted = true;
                result.abort_step = step;
                return result;
            }

            if (step % cfg.log_every == 0 && !sr.skipped) {
                ck.loss_history.push_back({step, sr.mean_loss});
                if (log) {
                    *log << "step " << step << " epoch " << epoch << " loss " << sr.mean_loss
                         << " degenerate " << sr.degenerate << "\n";
                }
            }
            if (step % cfg.coherence_every == 0) {
                const double coh = final_coherence(ck.params);
                ck.coherence_history.push_back({step, coh});
                if (log) {
                    *log << "step " << step << " coherence " << coh << "\n";
                }
                if (observer) {
                    observer(step, coh, ck.params);
                }
            }
        }
    }
    ck.step = step;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, dims, tensors, optimizer state,
// histories. All integers and IEEE doubles little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'R', 'S', 'F', 'M', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::ostream &out, const void *p, size_t n) {
    out.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream &out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    put_bytes(out, b, 4);
}

void put_u64(std::ostream &out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    put_bytes(out, b, 8);
}

void put_f64(std::ostream &out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

uint32_t get_u32(std::istream &in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char *>(b), 4);
    if (!in) {
        throw ParseError("checkpoint: truncated file");
    }
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

uint64_t get_u64(std::istream &in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char *>(b), 8);
    if (!in) {
        throw ParseError("checkpoint: truncated file");
    }
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

double get_f64(std::istream &in) {
    const uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_mat(std::ostream &out, const Mat &m) {
    put_u32(out, static_cast<uint32_t>(m.rows()));
    put_u32(out, static_cast<uint32_t>(m.cols()));
    for (int i = 0; i < m.size(); ++i) {
        put_f64(out, m.data()[i]);
    }
}

Mat get_mat(std::istream &in) {
    const int rows = static_cast<int>(get_u32(in));
    const int cols = static_cast<int>(get_u32(in));
    if (rows < 0 || cols < 0 || static_cast<int64_t>(rows) * cols > (1 << 28)) {
        throw ParseError("checkpoint: implausible tensor size");
    }
    Mat m(rows, cols);
    for (int i = 0; i < m.size(); ++i) {
        m.data()[i] = get_f64(in);
    }
    return m;
}

} // namespace

void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot write checkpoint: " + path);
    }
    put_bytes(out, kMagic, 8);
    put_u32(out, kVersion);
    const ModelDims &dims = ckpt.params.dims;
    put_u32(out, static_cast<uint32_t>(dims.p));
    put_u32(out, static_cast<uint32_t>(dims.n()));
    for (int ki : dims.k) {
        put_u32(out, static_cast<uint32_t>(ki));
    }
    auto tensors = ckpt.params.tensors();
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const Mat *t : tensors) {
        put_mat(out, *t);
    }
    const bool adam = !ckpt.opt.m.empty();
    put_u32(out, adam ? 1u : 0u);
    put_u64(out, static_cast<uint64_t>(ckpt.opt.step));
    if (adam) {
        for (const Mat &m : ckpt.opt.m) {
            put_mat(out, m);
        }
        for (const Mat &v : ckpt.opt.v) {
            put_mat(out, v);
        }
    }
    put_u64(out, ckpt.loss_history.size());
    for (const auto &lp : ckpt.loss_history) {
        put_u64(out, static_cast<uint64_t>(lp.step));
        put_f64(out, lp.value);
    }
    put_u64(out, ckpt.coherence_history.size());
    for (const auto &lp : ckpt.coherence_history) {
        put_u64(out, static_cast<uint64_t>(lp.step));
        put_f64(out, lp.value);
    }
    put_u64(out, static_cast<uint64_t>(ckpt.step));
    if (!out) {
        throw ParseError("checkpoint write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open checkpoint: " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError("checkpoint: bad magic");
    }
    const uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ck;
    ModelDims dims;
    dims.p = static_cast<int>(get_u32(in));
    const int n = static_cast<int>(get_u32(in));
    for (int i = 0; i < n; ++i) {
        dims.k.push_back(static_cast<int>(get_u32(in)));
    }
    dims.validate();

    const uint32_t tensor_count = get_u32(in);
    std::vector<Mat> tensors;
    tensors.reserve(tensor_count);
    for (uint32_t i = 0; i < tensor_count; ++i) {
        tensors.push_back(get_mat(in));
    }
    // distribute in the documented order
    const size_t expect = 1 + (n - 1) + n + (n - 1) + 2;
    if (tensors.size() != expect) {
        throw ParseError("checkpoint: tensor count mismatch");
    }
    size_t idx = 0;
    ck.params.dims = dims;
    ck.params.d1_sharp = std::move(tensors[idx++]);
    for (int i = 1; i < n; ++i) {
        ck.params.dicts.push_back(std::move(tensors[idx++]));
    }
    for (int i = 0; i < n; ++i) {
        ck.params.enc_thresholds.push_back(std::move(tensors[idx++]));
    }
    for (int i = 1; i < n; ++i) {
        ck.params.dec_thresholds.push_back(std::move(tensors[idx++]));
    }
    ck.params.readout = std::move(tensors[idx++]);
    ck.params.cam_coeffs = std::move(tensors[idx++]);
    ck.params.validate();

    const bool adam = get_u32(in) != 0;
    ck.opt.step = static_cast<int64_t>(get_u64(in));
    if (adam) {
        for (uint32_t i = 0; i < tensor_count; ++i) {
            ck.opt.m.push_back(get_mat(in));
        }
        for (uint32_t i = 0; i < tensor_count; ++i) {
            ck.opt.v.push_back(get_mat(in));
        }
    }
    const uint64_t loss_len = get_u64(in);
    for (uint64_t i = 0; i < loss_len; ++i) {
        LogPoint lp;
        lp.step = static_cast<int64_t>(get_u64(in));
        lp.value = get_f64(in);
        ck.loss_history.push_back(lp);
    }
    const uint64_t coh_len = get_u64(in);
    for (uint64_t i = 0; i < coh_len; ++i) {
        LogPoint lp;
        lp.step = static_cast<int64_t>(get_u64(in));
        lp.value = get_f64(in);
        ck.coherence_history.push_back(lp);
    }
    ck.step = static_cast<int64_t>(get_u64(in));
    return ck;
}

} // namespace nrsfm
