#include "cortical/channels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cortical {

ChannelModel awgn_channel(int dim) {
  if (dim < 1) throw std::invalid_argument("awgn_channel: dim must be >= 1");
  ChannelModel m;
  m.kind = ChannelKind::Awgn;
  m.dim = dim;
  return m;
}

ChannelModel mimo_channel(double r2) {
  if (!(r2 > 0.0)) throw std::invalid_argument("mimo_channel: r2 must be > 0");
  ChannelModel m;
  m.kind = ChannelKind::Mimo;
  m.dim = 2;
  m.mimo_diag = Eigen::Vector2d(1.0, r2);
  return m;
}

ChannelModel cauchy_channel(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("cauchy_channel: gamma must be > 0");
  ChannelModel m;
  m.kind = ChannelKind::Cauchy;
  m.dim = 1;
  m.cauchy_scale = gamma;
  return m;
}

ChannelModel rayleigh_equiv_channel() {
  ChannelModel m;
  m.kind = ChannelKind::RayleighEquiv;
  m.dim = 1;
  return m;
}

int channel_output_dim(const ChannelModel& model) { return model.dim; }

namespace {

void check_input(const ChannelModel& model, const Matrix& x) {
  if (x.cols() != model.dim)
    throw std::invalid_argument("channel_apply: input width " +
                                std::to_string(x.cols()) + " != channel dim " +
                                std::to_string(model.dim));
  if (!x.allFinite())
    throw std::invalid_argument("channel_apply: non-finite input");
  if (model.kind == ChannelKind::RayleighEquiv) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (!(x(i, 0) > 0.0 && x(i, 0) <= 1.0))
        throw std::invalid_argument(
            "channel_apply: rayleigh_equiv input must lie in (0, 1]");
  }
}

Matrix cauchy_noise(double scale, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix n(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) n(i, j) = rng.cauchy(scale);
  return n;
}

Matrix unit_exponential(Eigen::Index rows, Rng& rng) {
  Matrix e(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) e(i, 0) = rng.exponential(1.0);
  return e;
}

}  // namespace

Matrix channel_apply(const ChannelModel& model, const Matrix& x, Rng& rng) {
  check_input(model, x);
  switch (model.kind) {
    case ChannelKind::Awgn:
      return x + rng.normal_matrix(x.rows(), x.cols());
    case ChannelKind::Mimo:
      return (x.array().rowwise() *
              model.mimo_diag.transpose().array()).matrix() +
             rng.normal_matrix(x.rows(), x.cols());
    case ChannelKind::Cauchy:
      return x + cauchy_noise(model.cauchy_scale, x.rows(), x.cols(), rng);
    case ChannelKind::RayleighEquiv:
      // v = e / s with e ~ Exp(1): an Exp(s) draw sharing the uniform stream.
      return unit_exponential(x.rows(), rng).cwiseQuotient(x);
  }
  throw std::logic_error("channel_apply: unknown channel kind");
}

Var channel_apply(const ChannelModel& model, Var x, Rng& rng) {
  check_input(model, x.value());
  Tape& tape = *x.tape();
  switch (model.kind) {
    case ChannelKind::Awgn:
      return add(x, tape.constant(rng.normal_matrix(x.rows(), x.cols())));
    case ChannelKind::Mimo:
      return add(scale_cols(x, model.mimo_diag.transpose()),
                 tape.constant(rng.normal_matrix(x.rows(), x.cols())));
    case ChannelKind::Cauchy:
      return add(x, tape.constant(cauchy_noise(model.cauchy_scale, x.rows(),
                                               x.cols(), rng)));
    case ChannelKind::RayleighEquiv:
      return cmul(reciprocal(x), unit_exponential(x.rows(), rng));
  }
  throw std::logic_error("channel_apply: unknown channel kind");
}

ConstraintSpec peak_constraint(double A, PeakMode mode) {
  ConstraintSpec spec;
  spec.peak_bound = A;
  spec.lambda_peak = 1;
  spec.peak_mode = mode;
  validate(spec);
  return spec;
}

ConstraintSpec average_constraint(double P) {
  ConstraintSpec spec;
  spec.average_bound = P;
  spec.lambda_avg = 1;
  validate(spec);
  return spec;
}

ConstraintSpec log_power_constraint(double A, double gamma) {
  ConstraintSpec spec;
  spec.log_power = std::make_pair(A, gamma);
  validate(spec);
  return spec;
}

ConstraintSpec inverse_moment_constraint(double a) {
  ConstraintSpec spec;
  spec.inverse_moment_bound = a;
  validate(spec);
  return spec;
}

void validate(const ConstraintSpec& spec) {
  if (spec.lambda_peak != 0 && spec.lambda_peak != 1)
    throw std::invalid_argument("ConstraintSpec: lambda_peak must be 0 or 1");
  if (spec.lambda_avg != 0 && spec.lambda_avg != 1)
    throw std::invalid_argument("ConstraintSpec: lambda_avg must be 0 or 1");
  if ((spec.lambda_peak == 1) != spec.peak_bound.has_value())
    throw std::invalid_argument("ConstraintSpec: lambda_peak must match peak bound presence");
  if ((spec.lambda_avg == 1) != spec.average_bound.has_value())
    throw std::invalid_argument("ConstraintSpec: lambda_avg must match average bound presence");
  if (spec.peak_bound && !(*spec.peak_bound > 0.0))
    throw std::invalid_argument("ConstraintSpec: peak bound must be > 0");
  if (spec.average_bound && !(*spec.average_bound > 0.0))
    throw std::invalid_argument("ConstraintSpec: average bound must be > 0");
  if (spec.log_power) {
    const auto [A, gamma] = *spec.log_power;
    if (!(gamma > 0.0) || !(A >= gamma))
      throw std::invalid_argument("ConstraintSpec: log power needs A >= gamma > 0");
  }
  if (spec.inverse_moment_bound && !(*spec.inverse_moment_bound > 0.0))
    throw std::invalid_argument("ConstraintSpec: inverse moment bound must be > 0");
}

double constraint_penalty(const Matrix& x, const ConstraintSpec& spec) {
  validate(spec);
  double penalty = 0.0;
  // In projection mode feasibility is enforced upstream and the peak hinge is
  // identically zero by construction, so it is skipped outright.
  if (spec.lambda_peak == 1 && spec.peak_mode == PeakMode::Penalty) {
    const double a2 = *spec.peak_bound * *spec.peak_bound;
    penalty += (x.rowwise().squaredNorm().array() - a2).max(0.0).mean();
  }
  if (spec.lambda_avg == 1)
    penalty += std::max(x.rowwise().squaredNorm().mean() - *spec.average_bound, 0.0);
  if (spec.log_power) {
    if (x.cols() != 1)
      throw std::invalid_argument("constraint_penalty: log power constraint is scalar-input only");
    const auto [A, gamma] = *spec.log_power;
    const double c = ((A + gamma) / A) * ((A + gamma) / A);
    const double mean_log =
        (c + (x.array() / A).square()).log().mean();
    penalty += std::max(mean_log - std::log(4.0), 0.0);
  }
  if (spec.inverse_moment_bound) {
    if (x.cols() != 1)
      throw std::invalid_argument("constraint_penalty: inverse moment constraint is scalar-input only");
    penalty += std::max((x.array().inverse() - 1.0).mean() - *spec.inverse_moment_bound, 0.0);
  }
  return penalty;
}

Var constraint_penalty(Tape& tape, Var x, const ConstraintSpec& spec) {
  validate(spec);
  Var total = tape.constant(Matrix::Zero(1, 1));
  if (spec.lambda_peak == 1 && spec.peak_mode == PeakMode::Penalty) {
    const double a2 = *spec.peak_bound * *spec.peak_bound;
    total = add(total, mean_all(hinge(add_scalar(row_sqnorm(x), -a2))));
  }
  if (spec.lambda_avg == 1)
    total = add(total, hinge(add_scalar(mean_all(row_sqnorm(x)), -*spec.average_bound)));
  if (spec.log_power) {
    if (x.cols() != 1)
      throw std::invalid_argument("constraint_penalty: log power constraint is scalar-input only");
    const auto [A, gamma] = *spec.log_power;
    const double c = ((A + gamma) / A) * ((A + gamma) / A);
    Var mean_log = mean_all(log(add_scalar(scale(square(x), 1.0 / (A * A)), c)));
    total = add(total, hinge(add_scalar(mean_log, -std::log(4.0))));
  }
  if (spec.inverse_moment_bound) {
    if (x.cols() != 1)
      throw std::invalid_argument("constraint_penalty: inverse moment constraint is scalar-input only");
    Var mean_cost = mean_all(add_scalar(reciprocal(x), -1.0));
    total = add(total, hinge(add_scalar(mean_cost, -*spec.inverse_moment_bound)));
  }
  return total;
}

Matrix project_peak(const Matrix& x, double A) {
  if (!(A > 0.0)) throw std::invalid_argument("project_peak: A must be > 0");
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double r = out.row(i).norm();
    if (r > A) out.row(i) *= A / r;
  }
  return out;
}

}  // namespace cortical
