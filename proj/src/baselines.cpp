#include "cortical/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cortical {

void validate(const DiscretizedChannel& ch) {
  const auto n_in = ch.input_grid.size();
  const auto n_out = ch.output_grid.size();
  if (n_in < 1 || n_out < 1)
    throw std::invalid_argument("DiscretizedChannel: empty grid");
  if (ch.transition.rows() != n_in || ch.transition.cols() != n_out)
    throw std::invalid_argument("DiscretizedChannel: transition shape mismatch");
  for (Eigen::Index i = 1; i < n_in; ++i)
    if (!(ch.input_grid(i) > ch.input_grid(i - 1)))
      throw std::invalid_argument("DiscretizedChannel: input grid not increasing");
  for (Eigen::Index j = 1; j < n_out; ++j)
    if (!(ch.output_grid(j) > ch.output_grid(j - 1)))
      throw std::invalid_argument("DiscretizedChannel: output grid not increasing");
  if ((ch.transition.array() < 0.0).any())
    throw std::invalid_argument("DiscretizedChannel: negative transition entry");
  for (Eigen::Index i = 0; i < n_in; ++i)
    if (std::abs(ch.transition.row(i).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("DiscretizedChannel: row " + std::to_string(i) +
                                  " does not sum to 1");
}

Eigen::VectorXd linspace(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("linspace: need n >= 2");
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

Eigen::VectorXd logspace(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("logspace: need hi > lo > 0");
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, std::log(lo), std::log(hi));
  return t.array().exp();
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Conditional output CDF F(y | x) for the closed-form channel kinds.
std::function<double(double, double)> conditional_cdf(const ChannelModel& model) {
  switch (model.kind) {
    case ChannelKind::Awgn:
      if (model.dim != 1)
        throw std::invalid_argument("discretize_channel: awgn supported for d=1 only");
      return [](double y, double x) { return normal_cdf(y - x); };
    case ChannelKind::Cauchy: {
      const double gamma = model.cauchy_scale;
      return [gamma](double y, double x) {
        return 0.5 + std::atan((y - x) / gamma) / std::numbers::pi;
      };
    }
    case ChannelKind::RayleighEquiv:
      return [](double v, double s) {
        return v <= 0.0 ? 0.0 : 1.0 - std::exp(-s * v);
      };
    case ChannelKind::Mimo:
      throw std::invalid_argument("discretize_channel: mimo is not supported");
  }
  throw std::logic_error("discretize_channel: unknown channel kind");
}

}  // namespace

DiscretizedChannel discretize_channel(const ChannelModel& model,
                                      const Eigen::VectorXd& input_grid,
                                      const Eigen::VectorXd& output_grid,
                                      const std::function<bool(double)>& feasible) {
  auto cdf = conditional_cdf(model);
  std::vector<double> kept;
  for (Eigen::Index i = 0; i < input_grid.size(); ++i) {
    if (i > 0 && !(input_grid(i) > input_grid(i - 1)))
      throw std::invalid_argument("discretize_channel: input grid not increasing");
    if (!feasible || feasible(input_grid(i))) kept.push_back(input_grid(i));
  }
  if (kept.empty())
    throw std::invalid_argument("discretize_channel: no feasible input points");
  const auto n_out = output_grid.size();
  for (Eigen::Index j = 1; j < n_out; ++j)
    if (!(output_grid(j) > output_grid(j - 1)))
      throw std::invalid_argument("discretize_channel: output grid not increasing");

  DiscretizedChannel ch;
  ch.input_grid = Eigen::Map<Eigen::VectorXd>(kept.data(),
                                              static_cast<Eigen::Index>(kept.size()));
  ch.output_grid = output_grid;
  ch.transition.resize(ch.input_grid.size(), n_out);

  // Cell edges at grid midpoints; first and last cells absorb the tails.
  Eigen::VectorXd edges(n_out + 1);
  edges(0) = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 1; j < n_out; ++j)
    edges(j) = 0.5 * (output_grid(j - 1) + output_grid(j));
  edges(n_out) = std::numeric_limits<double>::infinity();

  for (Eigen::Index i = 0; i < ch.input_grid.size(); ++i) {
    const double x = ch.input_grid(i);
    double prev = 0.0;
    for (Eigen::Index j = 0; j < n_out; ++j) {
      const double next = std::isinf(edges(j + 1)) ? 1.0 : cdf(edges(j + 1), x);
      ch.transition(i, j) = std::max(next - prev, 0.0);
      prev = next;
    }
    const double row_sum = ch.transition.row(i).sum();
    if (!(row_sum > 0.0))
      throw std::runtime_error("discretize_channel: empty conditional row");
    ch.transition.row(i) /= row_sum;
  }
  return ch;
}

namespace {

// Sum_j w_ij log w_ij per row, with 0 log 0 = 0; hoisted out of the BA loop.
Eigen::VectorXd neg_row_entropy(const Matrix& w) {
  return (w.array() * w.array().max(1e-300).log()).rowwise().sum();
}

// Conditional relative entropies D(p(y|x_i) || q) used by both BA variants.
Eigen::VectorXd row_divergences(const Matrix& w, const Eigen::VectorXd& wlogw,
                                const Eigen::VectorXd& q) {
  Eigen::VectorXd logq = q.array().max(1e-300).log();
  return wlogw - w * logq;
}

BaResult ba_iterate(const DiscretizedChannel& ch, const Eigen::VectorXd& penalty,
                    double tol, int max_iter) {
  const auto n = ch.input_grid.size();
  const Eigen::VectorXd wlogw = neg_row_entropy(ch.transition);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  BaResult result;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd q = ch.transition.transpose() * p;
    Eigen::VectorXd d = row_divergences(ch.transition, wlogw, q) - penalty;
    const double lower = p.dot(d);
    const double upper = d.maxCoeff();
    result.iterations = it;
    if (upper - lower < tol) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd logp = p.array().max(1e-300).log() + d.array();
    logp.array() -= logp.maxCoeff();
    p = logp.array().exp();
    p /= p.sum();
  }
  result.input_pmf = p;
  result.capacity_nats = mutual_information_nats(p, ch);
  return result;
}

}  // namespace

double mutual_information_nats(const Eigen::VectorXd& pmf,
                               const DiscretizedChannel& ch) {
  if (pmf.size() != ch.input_grid.size())
    throw std::invalid_argument("mutual_information_nats: pmf length mismatch");
  Eigen::VectorXd q = ch.transition.transpose() * pmf;
  Eigen::VectorXd d = row_divergences(ch.transition, neg_row_entropy(ch.transition), q);
  return pmf.dot(d);
}

BaResult blahut_arimoto(const DiscretizedChannel& ch, double tol, int max_iter) {
  validate(ch);
  return ba_iterate(ch, Eigen::VectorXd::Zero(ch.input_grid.size()), tol, max_iter);
}

BaResult blahut_arimoto_constrained(const DiscretizedChannel& ch,
                                    const Eigen::VectorXd& cost, double budget,
                                    double tol, int max_iter) {
  validate(ch);
  if (cost.size() != ch.input_grid.size())
    throw std::invalid_argument("blahut_arimoto_constrained: cost length mismatch");

  // Multiplier search runs on cheaper solves; only the final multiplier gets
  // the caller's full tolerance.
  const double rough_tol = std::max(tol, 1e-7);
  const int rough_iter = std::min(max_iter, 4000);
  auto rough = [&](double mu) { return ba_iterate(ch, mu * cost, rough_tol, rough_iter); };

  BaResult unconstrained = ba_iterate(ch, Eigen::VectorXd::Zero(cost.size()), tol, max_iter);
  if (unconstrained.input_pmf.dot(cost) <= budget) return unconstrained;

  // E[cost] at the fixed point decreases in mu; bracket then bisect.
  double mu_lo = 0.0, mu_hi = 1.0;
  while (rough(mu_hi).input_pmf.dot(cost) > budget) {
    mu_lo = mu_hi;
    mu_hi *= 2.0;
    if (mu_hi > 1e12)
      throw std::runtime_error("blahut_arimoto_constrained: multiplier bracket failed");
  }
  for (int it = 0; it < 45; ++it) {
    const double mu = 0.5 * (mu_lo + mu_hi);
    const BaResult r = rough(mu);
    if (r.input_pmf.dot(cost) > budget) {
      mu_lo = mu;
    } else {
      mu_hi = mu;
      if (std::abs(r.input_pmf.dot(cost) - budget) < 1e-6 * std::max(budget, 1.0))
        break;
    }
  }
  return ba_iterate(ch, mu_hi * cost, tol, max_iter);
}

DiscretizedChannel bsc_channel(double crossover) {
  if (!(crossover >= 0.0 && crossover <= 1.0))
    throw std::invalid_argument("bsc_channel: crossover must be in [0, 1]");
  DiscretizedChannel ch;
  ch.input_grid = Eigen::Vector2d(0.0, 1.0);
  ch.output_grid = Eigen::Vector2d(0.0, 1.0);
  ch.transition.resize(2, 2);
  ch.transition << 1.0 - crossover, crossover, crossover, 1.0 - crossover;
  return ch;
}

DiscretizedChannel noiseless_channel(int arity) {
  if (arity < 1) throw std::invalid_argument("noiseless_channel: arity must be >= 1");
  DiscretizedChannel ch;
  ch.input_grid = linspace(0.0, arity - 1.0, std::max(arity, 2)).head(arity);
  if (arity == 1) ch.input_grid = Eigen::VectorXd::Zero(1);
  ch.output_grid = ch.input_grid;
  ch.transition = Matrix::Identity(arity, arity);
  return ch;
}

DiscretizedChannel discretize_awgn_peak(double A, int n_in, int n_out) {
  if (!(A > 0.0)) throw std::invalid_argument("discretize_awgn_peak: A must be > 0");
  return discretize_channel(awgn_channel(1), linspace(-A, A, n_in),
                            linspace(-A - 8.0, A + 8.0, n_out));
}

DiscretizedChannel discretize_rayleigh(int n_in, int n_out) {
  const Eigen::VectorXd s_grid = linspace(1.0 / n_in, 1.0, n_in);
  // Noise scale is 1/s; log-spaced output cells cover the full dynamic range.
  const double v_max = 8.0 / s_grid(0);
  return discretize_channel(rayleigh_equiv_channel(), s_grid,
                            logspace(1e-4, v_max, n_out));
}

BaResult awgn_peak_ba(double A, double tol) {
  return blahut_arimoto(discretize_awgn_peak(A), tol);
}

BaResult rayleigh_ba(double a, double tol) {
  if (!(a > 0.0)) throw std::invalid_argument("rayleigh_ba: a must be > 0");
  DiscretizedChannel ch = discretize_rayleigh();
  Eigen::VectorXd cost = ch.input_grid.array().inverse() - 1.0;
  return blahut_arimoto_constrained(ch, cost, a, tol);
}

double shannon_awgn_bound_bits(double A, int d) {
  if (!(A > 0.0) || d < 1)
    throw std::invalid_argument("shannon_awgn_bound_bits: need A > 0 and d >= 1");
  return 0.5 * d * std::log2(1.0 + A * A / d);
}

double mckellips_bound_bits(double A) {
  if (!(A > 0.0)) throw std::invalid_argument("mckellips_bound_bits: A must be > 0");
  const double first = std::log2(1.0 + 2.0 * A / std::sqrt(2.0 * std::numbers::pi * std::numbers::e));
  const double second = 0.5 * std::log2(1.0 + A * A);
  return std::min(first, second);
}

double cauchy_capacity_nats(double A, double gamma) {
  if (!(gamma > 0.0) || A < gamma)
    throw std::invalid_argument("cauchy_capacity_nats: need A >= gamma > 0");
  return std::log(A / gamma);
}

double gaussian_mi_analytic(double rho) {
  if (!(std::abs(rho) < 1.0))
    throw std::invalid_argument("gaussian_mi_analytic: need |rho| < 1");
  return -0.5 * std::log1p(-rho * rho);
}

}  // namespace cortical
