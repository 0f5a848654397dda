#pragma once

#include <optional>
#include <utility>

#include "cortical/autodiff.hpp"
#include "cortical/rng.hpp"

namespace cortical {

enum class ChannelKind { Awgn, Mimo, Cauchy, RayleighEquiv };

// Stochastic map y = H(x). Immutable after construction; sampling needs an
// exclusive Rng per run.
struct ChannelModel {
  ChannelKind kind = ChannelKind::Awgn;
  int dim = 1;                              // input dimension
  Eigen::Vector2d mimo_diag{1.0, 1.0};      // H = diag(1, r2)
  double cauchy_scale = 1.0;                // gamma
};

ChannelModel awgn_channel(int dim);
ChannelModel mimo_channel(double r2);
ChannelModel cauchy_channel(double gamma);
ChannelModel rayleigh_equiv_channel();

int channel_output_dim(const ChannelModel& model);

// One channel use per input row, fresh noise per row.
Matrix channel_apply(const ChannelModel& model, const Matrix& x, Rng& rng);

// Reparameterized version: same draws as the plain one for the same rng
// state, with gradients flowing through x.
Var channel_apply(const ChannelModel& model, Var x, Rng& rng);

enum class PeakMode { Penalty, Project };

// Input-constraint specification. lambda flags mirror the presence of the
// peak/average bounds; the peak bound may be enforced by hard projection
// instead of the hinge (the hinge term is then identically zero).
struct ConstraintSpec {
  std::optional<double> peak_bound;                      // ||x|| <= A
  std::optional<double> average_bound;                   // E||x||^2 <= P
  std::optional<std::pair<double, double>> log_power;    // (A, gamma)
  std::optional<double> inverse_moment_bound;            // E[1/s - 1] <= a
  int lambda_peak = 0;
  int lambda_avg = 0;
  PeakMode peak_mode = PeakMode::Penalty;

  bool any_constraint() const {
    return peak_bound || average_bound || log_power || inverse_moment_bound;
  }
};

ConstraintSpec peak_constraint(double A, PeakMode mode = PeakMode::Penalty);
ConstraintSpec average_constraint(double P);
ConstraintSpec log_power_constraint(double A, double gamma);
ConstraintSpec inverse_moment_constraint(double a);

void validate(const ConstraintSpec& spec);

// Batch-mean hinge penalty over all active constraints; nonnegative, zero
// exactly when every hinge argument is <= 0.
double constraint_penalty(const Matrix& x, const ConstraintSpec& spec);
Var constraint_penalty(Tape& tape, Var x, const ConstraintSpec& spec);

// Scales every row with ||x_i|| > A onto radius A; rows inside unchanged.
Matrix project_peak(const Matrix& x, double A);

}  // namespace cortical
