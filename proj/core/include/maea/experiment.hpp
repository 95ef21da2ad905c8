#pragma once

#include <iosfwd>

#include "maea/diagnostics.hpp"

namespace maea {

enum class NoiseKind { none, gaussian, uniform };
enum class DecayKind { none, geometric };

// Parsed experiment description: spaces, algorithm parameters, and the
// synthetic data generator (ground truth over the union dictionary, noise
// law, and the target-decay profile that controls validity).
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string out_dir = "out";
  DomainBox domain{Vec::Zero(1), Vec::Ones(1)};
  std::vector<FeatureDescriptor> features1;
  std::vector<FeatureDescriptor> features2;
  SelectionConfig selection;
  AlgorithmConfig algorithm;
  Vec truth_coefficients;  // over the union dictionary, may be empty
  NoiseKind noise = NoiseKind::none;
  double noise_param = 0.0;
  DecayKind decay = DecayKind::geometric;
  double decay_rate = 0.9;
  double amplitude = 2.0;
  Vec initial1, initial2;  // initial estimates; empty means zero
};

struct ConfigError {
  int line = 0;
  std::string message;
};

// Line-oriented `key = value` text; '#' starts a comment.  Unknown keys are
// rejected with the offending line and key name.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct Experiment {
  ExperimentConfig config;
  FusionSpace fusion;
  TransferOperators ops;
};

Experiment prepare_experiment(const ExperimentConfig& cfg);

// Synthetic per-agent data stream: x uniform over the box, y = decay(n) *
// (truth(x) + noise), independent per-agent streams derived from the seed.
DataSource make_generator_source(const Experiment& exp);
std::vector<DataPoint> generate_prefix(const Experiment& exp, int agent_id, int count);

void write_trace_csv(const std::string& path, const IterationTrace& trace);

// Subcommand bodies; each returns the process exit code and writes its
// human-readable report to `out`.
int cmd_run(const std::string& config_path, const std::string& out_dir_override,
            std::ostream& out, std::optional<uint64_t> seed_override = {});
int cmd_validate(const std::string& config_path, int horizon, std::ostream& out,
                 std::optional<uint64_t> seed_override = {});
int cmd_norm_sweep(const std::string& config_path, const std::string& operator_name, int decades,
                   const std::string& out_dir_override, std::ostream& out,
                   std::optional<uint64_t> seed_override = {});
int cmd_diagnose(const std::string& config_path, std::ostream& out,
                 std::optional<uint64_t> seed_override = {});

}  // namespace maea
