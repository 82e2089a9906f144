#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nrsfm/errors.hpp"

namespace nrsfm {

/// Resolved configuration for one command: schema defaults, then config-file
/// values, then flag overrides (flags win). Unknown keys are rejected. The
/// emitted manifest lists every resolved key and is itself a valid config
/// file, so a run can be reproduced with --config <out>.manifest.
class RunConfig {
  public:
    explicit RunConfig(std::string command);

    const std::string &command() const { return command_; }

    void define(const std::string &key, const std::string &default_value);

    /// key = value lines, '#' comments. A [section] header scopes the keys
    /// that follow to the named command; keys before any section apply to
    /// every command. Sections for other commands are skipped.
    void load_file(const std::string &path);

    /// Flag-level override; throws UsageError for keys not in the schema.
    void set(const std::string &key, const std::string &value);

    std::string get(const std::string &key) const;
    int get_int(const std::string &key) const;
    double get_double(const std::string &key) const;
    uint64_t get_seed(const std::string &key) const;
    bool get_bool(const std::string &key) const;
    std::vector<int> get_layers(const std::string &key) const;

    void write_manifest(const std::string &path) const;

  private:
    std::string command_;
    std::map<std::string, std::string> values_;
};

/// Schema constructors (one per subcommand).
RunConfig make_synth_config();
RunConfig make_train_config();
RunConfig make_reconstruct_config();
RunConfig make_eval_config();
RunConfig make_coherence_config();

// Commands return process exit codes (0 ok, 3 for a numeric abort that
// still produced output). Errors surface as exceptions; the CLI maps them.
int cmd_synth(const RunConfig &cfg);
int cmd_train(const RunConfig &cfg);
int cmd_reconstruct(const RunConfig &cfg);
int cmd_eval(const RunConfig &cfg);
int cmd_coherence(const RunConfig &cfg);

uint64_t fnv1a_file_checksum(const std::string &path);

} // namespace nrsfm
