#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace cortical {

// Seedable 64-bit generator with named sub-streams. Every source of
// randomness in a run (init, latent, channel noise, derangement) owns its
// own stream split off a master seed, so runs are reproducible draw by draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream; does not depend on draws consumed so far.
  Rng split(std::uint64_t stream) const;

  // Seed the stream above would start from; handy when an API wants a seed
  // rather than a generator.
  std::uint64_t stream_seed(std::uint64_t stream) const;

  std::uint64_t next_u64();
  double uniform();            // [0, 1)
  double normal();             // standard normal, Box-Muller with cached spare
  double exponential(double rate);
  double cauchy(double scale); // inverse-CDF tan transform

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                                 double lo, double hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cortical
