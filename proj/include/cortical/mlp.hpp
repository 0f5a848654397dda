#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cortical/autodiff.hpp"
#include "cortical/rng.hpp"

namespace cortical {

enum class Activation { Relu, Tanh };
enum class OutputActivation { Identity, Softplus, Sigmoid, TanhScaled };

struct MlpConfig {
  int input_dim = 1;
  std::vector<int> hidden_layers;
  int output_dim = 1;
  Activation hidden_activation = Activation::Relu;
  OutputActivation output_activation = OutputActivation::Identity;
  double output_scale = 1.0;  // TanhScaled head: output_scale * tanh(pre)
};

void validate(const MlpConfig& config);

// Feed-forward network. weights[l] is (in_l x out_l), biases[l] is (1 x out_l).
struct Mlp {
  MlpConfig config;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  std::size_t layer_count() const { return weights.size(); }
};

// Fan-scaled uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases.
// Deterministic for a fixed seed.
Mlp mlp_new(const MlpConfig& config, std::uint64_t seed);

// Plain evaluation, no tape. Throws on batch-width mismatch or non-finite output.
Matrix mlp_forward(const Mlp& mlp, const Matrix& batch);

// Network parameters inserted on a tape, in layer order.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

MlpVars mlp_params(Tape& tape, const Mlp& mlp, bool trainable);

// Recorded forward pass through the given parameter nodes.
Var mlp_forward(const Mlp& mlp, const MlpVars& params, Var batch);

struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

// Reads accumulated gradients off parameter nodes after Tape::backward.
MlpGrads read_grads(const MlpVars& params);

double grad_norm(const MlpGrads& grads);
void clip_grad_norm(MlpGrads& grads, double max_norm);

struct AdamState {
  std::vector<Matrix> weight_m, weight_v;
  std::vector<Matrix> bias_m, bias_v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState adam_new(const Mlp& mlp, double learning_rate, double beta1 = 0.9,
                   double beta2 = 0.999, double epsilon = 1e-8);

// Bias-corrected Adam update. maximize=true ascends instead of descending.
void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state,
               bool maximize = false);

// Builds a scalar loss over the network parameters on the given tape.
using LossBuilder = std::function<Var(Tape&, const MlpVars&)>;

// Max over parameters of |analytic - central difference| / scale with
// scale = max(|analytic|, |numeric|, 1e-4); the floor keeps cancellation
// noise on near-zero gradient components from registering as error.
double finite_diff_check(const Mlp& mlp, const LossBuilder& loss, double step);

// True when every relu hidden pre-activation on the batch stays at least
// margin away from zero, so central differences cannot straddle a kink.
// Trivially true for tanh hidden layers.
bool relu_kink_margin(const Mlp& mlp, const Matrix& batch, double margin);

// Worst finite_diff_check result over `count` randomized architectures
// (depths 1-3, widths 4-15, alternating relu/tanh hidden activations, all
// four output heads) under a mean-squared-output loss.  Hidden biases get
// a small offset away from zero so no relu unit sits permanently on its
// kink, and each evaluation batch is redrawn until every pre-activation
// clears a margin wide enough for central differences to be one-sided.
double randomized_gradient_check(std::uint64_t seed, int count = 20);

}  // namespace cortical
