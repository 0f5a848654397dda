#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cortical/channels.hpp"
#include "cortical/mlp.hpp"

namespace cortical {

// Hyperparameters of the cooperative max-max training loop.
struct TrainConfig {
  int steps = 5000;              // generator steps (N)
  int disc_steps_per_gen = 10;   // discriminator steps per generator step (K)
  int batch = 512;               // m
  double alpha = 1.0;
  int latent_dim = 1;
  std::uint64_t seed = 0;
  int capacity_window = 200;     // trailing steps averaged for the estimate
  double lr_gen = 1e-4;
  double lr_disc = 2e-4;
  double lr_floor = 1.0;         // both rates anneal linearly to this fraction
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double grad_clip = 10.0;
};

struct TraceEntry {
  double value = 0.0;          // two-term value function on the step's batch
  double capacity_nats = 0.0;  // value / alpha + 1 - ln alpha
  double penalty = 0.0;        // constraint hinge penalty on the same batch
};

struct CapacityTrace {
  std::vector<TraceEntry> entries;
  double final_capacity_nats = 0.0;  // trailing-window mean
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error("divergence at step " + std::to_string(step) + ": " + what),
        step(step) {}
  int step;
};

// Fixed-point-free permutation of {0..m-1}: cyclic shift by k ~ U{1..m-1}.
std::vector<int> derange(int m, Rng& rng);

// Capacity readout from the value function.
double estimate_capacity(double value, double alpha);

// Two-term value function alpha * mean(log d_paired) - mean(d_unpaired),
// with the log argument clamped below at 1e-8. Throws if any paired output
// is negative (a positive head can only reach zero by underflow, which the
// clamp absorbs). The training loops instead take the paired logarithm on
// the discriminator's pre-head output, which is exact in that regime.
double value_function(const Eigen::VectorXd& d_paired,
                      const Eigen::VectorXd& d_unpaired, double alpha);
Var value_function(Tape& tape, Var d_paired, Var d_unpaired, double alpha);

// Value function evaluated through a discriminator network on row-aligned
// paired and unpaired batches.
double discriminator_objective(const Mlp& discriminator, const Matrix& x,
                               const Matrix& y_paired, const Matrix& y_unpaired,
                               double alpha);

// Effective generator output: network forward plus hard peak projection when
// the constraint mode asks for it (elliptical for the mimo channel).
Matrix generator_output(const Mlp& generator, const Matrix& z,
                        const ChannelModel& model, const ConstraintSpec& spec);
Var generator_output(Tape& tape, const Mlp& generator, const MlpVars& params,
                     Var z, const ChannelModel& model, const ConstraintSpec& spec);

// Full generator-side objective on one latent batch: fresh channel noise,
// fresh derangement, hinge penalties subtracted.
double generator_objective(const Mlp& generator, const Mlp& discriminator,
                           const ChannelModel& model, const Matrix& z,
                           double alpha, const ConstraintSpec& spec,
                           Rng& channel_rng, Rng& derangement_rng);

struct TrainResult {
  Mlp generator;
  Mlp discriminator;
  CapacityTrace trace;
};

// Alternating cooperative training: K discriminator ascents per generator
// ascent, capacity recorded every generator step.
TrainResult train(const TrainConfig& config, const ChannelModel& model,
                  const ConstraintSpec& spec, const MlpConfig& gen_config,
                  const MlpConfig& disc_config);

// Discriminator-only training against a fixed joint sampler; returns the
// mutual-information estimate from the value function on a large fresh batch.
using PairedSampler = std::function<std::pair<Matrix, Matrix>(int batch, Rng&)>;

struct MiEstimateConfig {
  int steps = 3000;
  int batch = 512;
  double alpha = 1.0;
  int eval_batch = 100000;
  double lr = 5e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
};

double discriminator_mi_estimate(const PairedSampler& sampler,
                                 const MlpConfig& disc_config,
                                 const MiEstimateConfig& config);

// x ~ N(0,1), y = rho x + sqrt(1-rho^2) n: the analytic-MI reference pair.
PairedSampler gaussian_pair_sampler(double rho);

}  // namespace cortical
