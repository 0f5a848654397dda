#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cortical/trainer.hpp"

namespace cortical {

// Discrete distribution recovered from generator samples.
struct Pmf {
  Eigen::VectorXd support;  // sorted atom locations (or radii in radial mode)
  Eigen::VectorXd mass;     // positive, sums to 1

  Eigen::Index size() const { return support.size(); }
};

void validate(const Pmf& pmf);

// Heuristic cluster width: a tenth of a tenth of the sample range, floored.
double default_merge_tol(double sample_range);

// 1-D agglomeration: sort, split at gaps wider than merge_tol, report each
// cluster's mean and relative frequency. Clusters under 0.5% mass are dropped
// and the rest renormalized.
Pmf extract_pmf(const std::vector<double>& samples, double merge_tol);

// Atom identification runs on at most this many samples. Gap-splitting
// isolates atoms only while the thin spread a finite-capacity generator
// leaves between them fragments into sub-floor clusters; with unbounded
// sample counts that spread fills every gap and fuses the support.
inline constexpr int kAtomSampleCap = 4000;

// Sup distance between the empirical CDF and a reference CDF.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

// Asymptotic one-sample critical value at the given significance level.
double ks_critical_value(int n, double significance);

struct RadialProfile {
  Pmf magnitude;
  double phase_ks = 0.0;  // KS distance of angles against uniform on (-pi, pi]
};

// Magnitude PMF and phase uniformity of 2-D points; an optional diagonal fade
// is applied first so the profile describes the constrained signal.
RadialProfile radial_profile(const Matrix& points,
                             const std::optional<Eigen::Vector2d>& fade = {},
                             double merge_tol = 0.0);

struct Cluster2d {
  Eigen::Vector2d center;
  double mass = 0.0;
};

// Greedy leader clustering in the plane; clusters under 0.5% mass dropped,
// masses renormalized, heaviest first.
std::vector<Cluster2d> cluster_points(const Matrix& points, double merge_tol);

struct SweepEntry {
  double peak_bound = 0.0;  // A
  Pmf pmf;
  double capacity_nats = 0.0;
  double shannon_bits = 0.0;
  double mckellips_bits = 0.0;
  bool diverged = false;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
};

// One full training run per peak bound on the scalar Gaussian channel, with
// per-point seeds split off the base seed. A diverging point is flagged and
// the sweep continues.
SweepResult bifurcation_sweep(const std::vector<double>& peak_bounds,
                              const TrainConfig& base,
                              const MlpConfig& gen_cfg,
                              const MlpConfig& disc_cfg,
                              PeakMode peak_mode = PeakMode::Project,
                              int eval_samples = 200000);

// CSV emission, 17 significant digits so parsing returns identical doubles.
void write_pmf_csv(const Pmf& pmf, const std::string& path);
Pmf read_pmf_csv(const std::string& path);

void write_trace_csv(const CapacityTrace& trace, const std::string& path);

struct SweepRow {
  double peak_bound;
  double capacity_nats;
  double capacity_bits;
  double shannon_bits;
  double mckellips_bits;
  int n_atoms;  // 0 marks a diverged point (capacities are then nan)
};

void write_sweep_csv(const SweepResult& result, const std::string& path);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

// Dependency-free SVG plots, 800x600, five ticks per axis.
void write_pmf_svg(const Pmf& pmf, const std::string& path,
                   const std::string& x_label);
void write_trace_svg(const CapacityTrace& trace, const std::string& path,
                     std::optional<double> reference_nats = {});
void write_sweep_svg(const SweepResult& result, const std::string& path);
void write_bifurcation_svg(const SweepResult& result, const std::string& path);
void write_scatter_svg(const Matrix& points, const std::string& path,
                       const std::string& x_label, const std::string& y_label);

}  // namespace cortical
