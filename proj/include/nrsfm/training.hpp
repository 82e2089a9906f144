#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nrsfm/data.hpp"
#include "nrsfm/model.hpp"

namespace nrsfm {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    ModelDims dims;
    int batch_size = 64;
    int epochs = 10;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    int log_every = 10;
    int coherence_every = 50;
    int threads = 1;

    void validate() const;
};

/// Adam moments, aligned with ModelParams::tensors(); empty for SGD.
struct OptState {
    int64_t step = 0;
    std::vector<Mat> m;
    std::vector<Mat> v;
};

struct LogPoint {
    int64_t step = 0;
    double value = 0.0;
};

struct Checkpoint {
    ModelParams params;
    int64_t step = 0;
    OptState opt;
    std::vector<LogPoint> loss_history;
    std::vector<LogPoint> coherence_history;
};

/// Dictionary entries ~ Gaussian(0, 1/sqrt(fan_in)), thresholds 0.01,
/// deterministic per seed. D_1 is drawn in its 3p x k_1 form and reshaped.
ModelParams init_params(const ModelDims &dims, uint64_t seed);

/// The final dictionary D_n (for n = 1 this is D_1 itself).
Mat final_dictionary(const ModelParams &params);
double final_coherence(const ModelParams &params);

// ---------------------------------------------------------------------------
// Batch gradients: the OpenMP kernel and its serial reference. Per-frame
// tapes are independent; the reduction runs serially in frame-index order in
// both paths, so results are bitwise identical for any thread count.
// ---------------------------------------------------------------------------

struct BatchGrads {
    std::vector<Mat> grads; // mean over included frames, tensor order
    double mean_loss = 0.0;
    int included = 0;
    int degenerate = 0;
};

BatchGrads batch_gradients_serial(const std::vector<const Mat *> &frames,
                                  const ModelParams &params);
BatchGrads batch_gradients_parallel(const std::vector<const Mat *> &frames,
                                    const ModelParams &params, int threads);
BatchGrads batch_gradients(const std::vector<const Mat *> &frames,
                           const ModelParams &params, int threads);

struct StepResult {
    double mean_loss = 0.0;
    int degenerate = 0;
    bool skipped = false; // every frame in the batch was degenerate
};

/// One optimizer step on a batch of centered frames. Degenerate-camera
/// frames are dropped from the mean; thresholds are clamped to >= 0 after
/// the update.
StepResult train_step(const std::vector<const Mat *> &batch, ModelParams &params,
                      OptState &opt, const TrainConfig &cfg);

/// Called at the coherence-logging cadence with the current parameters.
using TrainObserver = std::function<void(int64_t step, double coherence,
                                         const ModelParams &params)>;

struct TrainResult {
    Checkpoint checkpoint;
    bool aborted = false;    // NaN loss; checkpoint holds the last good state
    int64_t abort_step = -1;
};

/// epochs x ceil(frames/batch_size) steps with seeded per-epoch reshuffling.
/// Logs loss every log_every steps and coherence(D_n) every coherence_every
/// steps. `log`, when given, receives one line per logged step.
TrainResult train(const LandmarkDataset &dataset, const TrainConfig &cfg,
                  const TrainObserver &observer = {}, std::ostream *log = nullptr);

// Binary checkpoint container (versioned, little-endian, bit-exact round
// trip). Layout documented in the README.
void save_checkpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint load_checkpoint(const std::string &path);

} // namespace nrsfm
