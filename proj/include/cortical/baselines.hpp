#pragma once

#include <functional>
#include <optional>

#include "cortical/channels.hpp"

namespace cortical {

// Discrete memoryless channel: transition(i, j) = p(y_j | x_i), row-stochastic.
struct DiscretizedChannel {
  Eigen::VectorXd input_grid;
  Eigen::VectorXd output_grid;
  Matrix transition;
};

void validate(const DiscretizedChannel& ch);

Eigen::VectorXd linspace(double lo, double hi, int n);
Eigen::VectorXd logspace(double lo, double hi, int n);

// Cell mass around each output grid point from the conditional CDF; edge
// cells absorb the tails. The optional filter restricts the input grid to
// the constraint-feasible set. Supported kinds: awgn (d=1), cauchy,
// rayleigh_equiv.
DiscretizedChannel discretize_channel(
    const ChannelModel& model, const Eigen::VectorXd& input_grid,
    const Eigen::VectorXd& output_grid,
    const std::function<bool(double)>& feasible = nullptr);

struct BaResult {
  double capacity_nats = 0.0;
  Eigen::VectorXd input_pmf;
  bool converged = false;
  int iterations = 0;
};

// Alternating-maximization capacity of a discrete memoryless channel; stops
// when the capacity bracket is narrower than tol.
BaResult blahut_arimoto(const DiscretizedChannel& ch, double tol = 1e-9,
                        int max_iter = 20000);

// Capacity under an average-cost constraint sum_i p_i cost_i <= budget,
// via bisection on the cost multiplier.
BaResult blahut_arimoto_constrained(const DiscretizedChannel& ch,
                                    const Eigen::VectorXd& cost, double budget,
                                    double tol = 1e-9, int max_iter = 20000);

// I(X;Y) in nats for a given input pmf over the channel.
double mutual_information_nats(const Eigen::VectorXd& pmf,
                               const DiscretizedChannel& ch);

// Reference channel builders.
DiscretizedChannel bsc_channel(double crossover);
DiscretizedChannel noiseless_channel(int arity);
DiscretizedChannel discretize_awgn_peak(double A, int n_in = 201, int n_out = 1601);
DiscretizedChannel discretize_rayleigh(int n_in = 201, int n_out = 1601);

// Oracle capacities used to validate trained runs, in nats.
BaResult awgn_peak_ba(double A, double tol = 1e-9);
BaResult rayleigh_ba(double a, double tol = 1e-9);

// Closed-form references.
double shannon_awgn_bound_bits(double A, int d);
double mckellips_bound_bits(double A);
double cauchy_capacity_nats(double A, double gamma);
double gaussian_mi_analytic(double rho);

constexpr double nats_to_bits = 1.4426950408889634;  // 1 / ln 2

}  // namespace cortical
