#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nrsfm/commands.hpp"
#include "nrsfm/errors.hpp"

namespace {

struct FlagValues {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Flags land in an override list applied after the config file (flags win).
void add_option(CLI::App *cmd, FlagValues &fv, const std::string &flag,
                const std::string &key, const std::string &help) {
    auto cb = [&fv, key](const std::string &v) { fv.overrides.emplace_back(key, v); };
    cmd->add_option_function<std::string>(flag, cb, help);
}

int run_command(nrsfm::RunConfig cfg, const FlagValues &fv,
                int (*command)(const nrsfm::RunConfig &)) {
    if (!fv.config.empty()) {
        cfg.load_file(fv.config);
    }
    for (const auto &[key, value] : fv.overrides) {
        cfg.set(key, value);
    }
    return command(cfg);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Deep NRSfM: block-sparse auto-encoder training and evaluation "
                 "from 2D landmark ensembles"};
    app.require_subcommand(1);

    FlagValues synth_fv, train_fv, rec_fv, eval_fv, coh_fv;

    CLI::App *synth = app.add_subcommand("synth", "Generate a synthetic landmark dataset");
    synth->add_option("--config", synth_fv.config, "Config file");
    add_option(synth, synth_fv, "--out", "out", "Output landmark file");
    add_option(synth, synth_fv, "--seed", "seed", "RNG seed");
    add_option(synth, synth_fv, "--frames", "frames", "Frame count");
    add_option(synth, synth_fv, "--points", "points", "Landmarks per frame");
    add_option(synth, synth_fv, "--noise", "noise", "Noise ratio ||N||_F/||W||_F");
    add_option(synth, synth_fv, "--source", "source", "builtin | planted | csv");
    add_option(synth, synth_fv, "--source-csv", "source_csv", "Shapes CSV (source=csv)");
    add_option(synth, synth_fv, "--layers", "layers", "Planted layer widths k1,...,kn");
    add_option(synth, synth_fv, "--max-active", "max_active", "Planted code sparsity");

    CLI::App *train = app.add_subcommand("train", "Train a model on a landmark dataset");
    train->add_option("--config", train_fv.config, "Config file");
    add_option(train, train_fv, "--dataset", "dataset", "Landmark file");
    add_option(train, train_fv, "--out", "out", "Checkpoint output path");
    add_option(train, train_fv, "--seed", "seed", "RNG seed");
    add_option(train, train_fv, "--layers", "layers", "Layer widths k1,...,kn");
    add_option(train, train_fv, "--epochs", "epochs", "Training epochs");
    add_option(train, train_fv, "--batch-size", "batch_size", "Mini-batch size");
    add_option(train, train_fv, "--lr", "lr", "Learning rate");
    add_option(train, train_fv, "--optimizer", "optimizer", "adam | sgd");
    add_option(train, train_fv, "--log-every", "log_every", "Loss logging cadence");
    add_option(train, train_fv, "--coherence-every", "coherence_every",
               "Coherence logging cadence");
    add_option(train, train_fv, "--threads", "threads", "Worker threads");
    add_option(train, train_fv, "--center", "center", "Center frames at load (true/false)");

    CLI::App *rec = app.add_subcommand("reconstruct",
                                       "Recover shapes and cameras for a dataset");
    rec->add_option("--config", rec_fv.config, "Config file");
    add_option(rec, rec_fv, "--checkpoint", "checkpoint", "Trained checkpoint");
    add_option(rec, rec_fv, "--dataset", "dataset", "Landmark file (GT not required)");
    add_option(rec, rec_fv, "--out", "out", "Reconstruction output file");
    add_option(rec, rec_fv, "--json-out", "json_out", "Optional JSON variant");
    add_option(rec, rec_fv, "--threads", "threads", "Worker threads");
    add_option(rec, rec_fv, "--center", "center", "Center frames at load (true/false)");

    CLI::App *ev = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
    ev->add_option("--config", eval_fv.config, "Config file");
    add_option(ev, eval_fv, "--checkpoint", "checkpoint", "Trained checkpoint");
    add_option(ev, eval_fv, "--dataset", "dataset", "Landmark file");
    add_option(ev, eval_fv, "--out", "out", "Report output file");
    add_option(ev, eval_fv, "--json-out", "json_out", "Optional JSON variant");
    add_option(ev, eval_fv, "--threads", "threads", "Worker threads");
    add_option(ev, eval_fv, "--center", "center", "Center frames at load (true/false)");

    CLI::App *coh = app.add_subcommand("coherence", "Dictionary coherence diagnostics");
    coh->add_option("--config", coh_fv.config, "Config file");
    add_option(coh, coh_fv, "--checkpoint", "checkpoint", "Trained checkpoint");
    add_option(coh, coh_fv, "--out", "out", "Report output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help
        }
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            return run_command(nrsfm::make_synth_config(), synth_fv, nrsfm::cmd_synth);
        }
        if (train->parsed()) {
            return run_command(nrsfm::make_train_config(), train_fv, nrsfm::cmd_train);
        }
        if (rec->parsed()) {
            return run_command(nrsfm::make_reconstruct_config(), rec_fv,
                               nrsfm::cmd_reconstruct);
        }
        if (ev->parsed()) {
            return run_command(nrsfm::make_eval_config(), eval_fv, nrsfm::cmd_eval);
        }
        if (coh->parsed()) {
            return run_command(nrsfm::make_coherence_config(), coh_fv, nrsfm::cmd_coherence);
        }
    } catch (const nrsfm::UsageError &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    } catch (const nrsfm::ParseError &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const nrsfm::SchemaError &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
    return 1;
}
