#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cortical/analysis.hpp"

namespace cortical {

// Configuration mistakes (unknown keys, unparsable or inapplicable values).
// The command line maps these to their own exit status.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { AwgnPeak, MimoPeak, CauchyLog, CauchyPeak, Rayleigh };

ExperimentKind parse_experiment(const std::string& name);
std::string experiment_name(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::AwgnPeak;
  double peak_bound = 1.0;      // A (awgn-peak, mimo-peak, cauchy-peak, cauchy-log)
  double cauchy_scale = 1.0;    // gamma
  double mimo_fade = 1.0;       // r2
  double inverse_moment = 1.0;  // a
  std::vector<double> grid;     // sweep peak bounds (sweep command only)
  TrainConfig train;
  std::string out_dir = "out";
  int eval_samples = 100000;
  double merge_tol = 0.0;       // 0 = data-driven default
};

// Per-experiment defaults before any file or command-line assignment.
ExperimentConfig default_experiment_config(ExperimentKind kind);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` lines; `#` starts a comment; blank lines ignored.
KeyValues parse_config_text(std::istream& in);

// Applies assignments in order over the per-experiment defaults. Unknown keys
// and keys that do not apply to the chosen experiment are rejected by name.
ExperimentConfig build_experiment_config(const KeyValues& pairs, bool allow_grid);

ChannelModel experiment_channel(const ExperimentConfig& config);
ConstraintSpec experiment_constraint(const ExperimentConfig& config);
MlpConfig experiment_generator_config(const ExperimentConfig& config);
MlpConfig experiment_discriminator_config(const ExperimentConfig& config);

struct RunArtifacts {
  Pmf pmf;  // input-value atoms; fading-state atoms (rayleigh); magnitudes (mimo)
  double capacity_nats = 0.0;
  double final_penalty = 0.0;
  double phase_ks = -1.0;    // mimo only
  int n_clusters = 0;        // mimo only
  double cauchy_ks = -1.0;   // cauchy-log only, against the matched-scale cdf
  double wall_seconds = 0.0;
  std::string summary_json;  // exact bytes written to summary.json
};

// Trains per config and writes trace.csv, trace.svg, the experiment's pmf and
// plot files, and summary.json into the output directory.
RunArtifacts run_experiment(const ExperimentConfig& config);

// Bifurcation sweep over config.grid; writes sweep.csv, bifurcation.svg, and
// capacity.svg. Diverged points are flagged in the csv, not fatal.
SweepResult run_sweep(const ExperimentConfig& config);

}  // namespace cortical
