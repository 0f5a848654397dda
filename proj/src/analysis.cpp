#include "cortical/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cortical/baselines.hpp"

namespace cortical {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return in;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& field, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + field + "' in " + path);
  }
}

void expect_header(std::ifstream& in, const std::string& expected,
                   const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw std::runtime_error("unexpected header '" + line + "' in " + path +
                             " (want '" + expected + "')");
}

constexpr double kMassFloor = 0.005;

}  // namespace

void validate(const Pmf& pmf) {
  if (pmf.support.size() == 0)
    throw std::invalid_argument("pmf: empty support");
  if (pmf.support.size() != pmf.mass.size())
    throw std::invalid_argument("pmf: support/mass size mismatch");
  for (Eigen::Index i = 0; i < pmf.size(); ++i) {
    if (!std::isfinite(pmf.support(i)) || !std::isfinite(pmf.mass(i)))
      throw std::invalid_argument("pmf: non-finite entry");
    if (pmf.mass(i) <= 0.0)
      throw std::invalid_argument("pmf: non-positive mass");
    if (i > 0 && pmf.support(i) <= pmf.support(i - 1))
      throw std::invalid_argument("pmf: support not strictly increasing");
  }
  if (std::abs(pmf.mass.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("pmf: masses do not sum to 1");
}

double default_merge_tol(double sample_range) {
  if (!(sample_range >= 0.0))
    throw std::invalid_argument("default_merge_tol: negative range");
  return std::max(0.05, 0.1 * sample_range / 10.0);
}

Pmf extract_pmf(const std::vector<double>& samples, double merge_tol) {
  if (samples.size() < 1000)
    throw std::invalid_argument("extract_pmf: need at least 1000 samples, got " +
                                std::to_string(samples.size()));
  if (!(merge_tol > 0.0))
    throw std::invalid_argument("extract_pmf: merge_tol must be positive");
  for (double s : samples)
    if (!std::isfinite(s))
      throw std::invalid_argument("extract_pmf: non-finite sample");

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());

  // Clusters are maximal runs with consecutive gaps <= merge_tol.
  std::vector<double> centers;
  std::vector<double> masses;
  const double n = static_cast<double>(sorted.size());
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted[i] - sorted[i - 1] > merge_tol) {
      const std::size_t count = i - begin;
      const double sum =
          std::accumulate(sorted.begin() + begin, sorted.begin() + i, 0.0);
      centers.push_back(sum / static_cast<double>(count));
      masses.push_back(static_cast<double>(count) / n);
      begin = i;
    }
  }

  std::vector<double> kept_centers, kept_masses;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (masses[i] >= kMassFloor) {
      kept_centers.push_back(centers[i]);
      kept_masses.push_back(masses[i]);
    }
  }
  if (kept_centers.empty())
    throw std::runtime_error("extract_pmf: no cluster reaches the mass floor");

  const double total = std::accumulate(kept_masses.begin(), kept_masses.end(), 0.0);
  Pmf pmf;
  pmf.support = Eigen::Map<Eigen::VectorXd>(kept_centers.data(),
                                            static_cast<Eigen::Index>(kept_centers.size()));
  pmf.mass = Eigen::Map<Eigen::VectorXd>(kept_masses.data(),
                                         static_cast<Eigen::Index>(kept_masses.size())) /
             total;
  validate(pmf);
  return pmf;
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.size() < 100)
    throw std::invalid_argument("ks_statistic: need at least 100 samples");
  if (!cdf) throw std::invalid_argument("ks_statistic: null cdf");
  std::sort(samples.begin(), samples.end());

  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  double prev_f = -1e-12;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    if (!(f >= -1e-12 && f <= 1.0 + 1e-12))
      throw std::invalid_argument("ks_statistic: cdf value outside [0, 1]");
    if (f < prev_f - 1e-12)
      throw std::invalid_argument("ks_statistic: cdf not monotone");
    prev_f = f;
    const double hi = static_cast<double>(i + 1) / n;
    const double lo = static_cast<double>(i) / n;
    d = std::max({d, std::abs(f - hi), std::abs(f - lo)});
  }
  return d;
}

double ks_critical_value(int n, double significance) {
  if (n < 1) throw std::invalid_argument("ks_critical_value: n must be positive");
  if (!(significance > 0.0 && significance < 1.0))
    throw std::invalid_argument("ks_critical_value: significance must be in (0, 1)");
  // Asymptotic Kolmogorov quantile: c(a) = sqrt(-ln(a/2) / 2).
  return std::sqrt(-0.5 * std::log(significance / 2.0)) /
         std::sqrt(static_cast<double>(n));
}

RadialProfile radial_profile(const Matrix& points,
                             const std::optional<Eigen::Vector2d>& fade,
                             double merge_tol) {
  if (points.cols() != 2)
    throw std::invalid_argument("radial_profile: points must have 2 columns");
  Matrix scaled = points;
  if (fade) {
    scaled.col(0) *= (*fade)(0);
    scaled.col(1) *= (*fade)(1);
  }
  const Eigen::VectorXd radii = scaled.rowwise().norm();
  if (radii.maxCoeff() <= 0.0)
    throw std::runtime_error("radial_profile: all points at the origin");

  if (merge_tol <= 0.0)
    merge_tol = default_merge_tol(radii.maxCoeff() - radii.minCoeff());

  std::vector<double> radius_samples(radii.data(), radii.data() + radii.size());

  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < scaled.rows(); ++i)
    if (radii(i) > 1e-12)
      angles.push_back(std::atan2(scaled(i, 1), scaled(i, 0)));

  RadialProfile profile;
  profile.magnitude = extract_pmf(radius_samples, merge_tol);
  profile.phase_ks = ks_statistic(std::move(angles), [](double t) {
    constexpr double pi = 3.14159265358979323846;
    return std::clamp((t + pi) / (2.0 * pi), 0.0, 1.0);
  });
  return profile;
}

std::vector<Cluster2d> cluster_points(const Matrix& points, double merge_tol) {
  if (points.cols() != 2)
    throw std::invalid_argument("cluster_points: points must have 2 columns");
  if (points.rows() < 1000)
    throw std::invalid_argument("cluster_points: need at least 1000 points");
  if (!(merge_tol > 0.0))
    throw std::invalid_argument("cluster_points: merge_tol must be positive");

  std::vector<Eigen::Vector2d> centers;
  std::vector<double> counts;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector2d p = points.row(i).transpose();
    if (!p.allFinite())
      throw std::invalid_argument("cluster_points: non-finite point");
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double dist = (centers[c] - p).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    if (best_dist <= merge_tol) {
      centers[best] += (p - centers[best]) / (counts[best] + 1.0);
      counts[best] += 1.0;
    } else {
      centers.push_back(p);
      counts.push_back(1.0);
    }
  }

  const double n = static_cast<double>(points.rows());
  std::vector<Cluster2d> clusters;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double mass = counts[c] / n;
    if (mass >= kMassFloor) clusters.push_back({centers[c], mass});
  }
  if (clusters.empty())
    throw std::runtime_error("cluster_points: no cluster reaches the mass floor");
  double total = 0.0;
  for (const auto& c : clusters) total += c.mass;
  for (auto& c : clusters) c.mass /= total;
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster2d& a, const Cluster2d& b) { return a.mass > b.mass; });
  return clusters;
}

SweepResult bifurcation_sweep(const std::vector<double>& peak_bounds,
                              const TrainConfig& base, const MlpConfig& gen_cfg,
                              const MlpConfig& disc_cfg, PeakMode peak_mode,
                              int eval_samples) {
  if (peak_bounds.empty())
    throw std::invalid_argument("bifurcation_sweep: no peak bounds");
  if (eval_samples < 1000)
    throw std::invalid_argument("bifurcation_sweep: need at least 1000 eval samples");

  const ChannelModel model = awgn_channel(1);
  const Rng master(base.seed);

  SweepResult result;
  for (std::size_t k = 0; k < peak_bounds.size(); ++k) {
    const double A = peak_bounds[k];
    SweepEntry entry;
    entry.peak_bound = A;
    entry.shannon_bits = shannon_awgn_bound_bits(A, 1);
    entry.mckellips_bits = mckellips_bound_bits(A);

    TrainConfig cfg = base;
    cfg.seed = master.stream_seed(100 + k);
    const ConstraintSpec spec = peak_constraint(A, peak_mode);
    try {
      const TrainResult trained = train(cfg, model, spec, gen_cfg, disc_cfg);
      Rng eval_rng = Rng(cfg.seed).split(5);
      const int m = std::min(eval_samples, kAtomSampleCap);
      const Matrix z = eval_rng.normal_matrix(m, cfg.latent_dim);
      const Matrix x = generator_output(trained.generator, z, model, spec);
      std::vector<double> samples(x.data(), x.data() + x.rows());
      const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
      entry.pmf = extract_pmf(samples, default_merge_tol(*hi - *lo));
      entry.capacity_nats = trained.trace.final_capacity_nats;
    } catch (const DivergenceError&) {
      entry.diverged = true;
      entry.capacity_nats = std::numeric_limits<double>::quiet_NaN();
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

void write_pmf_csv(const Pmf& pmf, const std::string& path) {
  validate(pmf);
  auto out = open_out(path);
  out << "support,mass\n";
  for (Eigen::Index i = 0; i < pmf.size(); ++i)
    out << fmt17(pmf.support(i)) << ',' << fmt17(pmf.mass(i)) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

Pmf read_pmf_csv(const std::string& path) {
  auto in = open_in(path);
  expect_header(in, "support,mass", path);
  std::vector<double> support, mass;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2)
      throw std::runtime_error("expected 2 fields per row in " + path);
    support.push_back(parse_double(fields[0], path));
    mass.push_back(parse_double(fields[1], path));
  }
  Pmf pmf;
  pmf.support = Eigen::Map<Eigen::VectorXd>(support.data(),
                                            static_cast<Eigen::Index>(support.size()));
  pmf.mass = Eigen::Map<Eigen::VectorXd>(mass.data(),
                                         static_cast<Eigen::Index>(mass.size()));
  validate(pmf);
  return pmf;
}

void write_trace_csv(const CapacityTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "step,J,capacity_nats,penalty\n";
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const TraceEntry& e = trace.entries[i];
    out << (i + 1) << ',' << fmt17(e.value) << ',' << fmt17(e.capacity_nats)
        << ',' << fmt17(e.penalty) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  auto out = open_out(path);
  out << "A,capacity_nats,capacity_bits,shannon_bits,mckellips_bits,n_atoms\n";
  for (const SweepEntry& e : result.entries) {
    const int n_atoms = e.diverged ? 0 : static_cast<int>(e.pmf.size());
    out << fmt17(e.peak_bound) << ',' << fmt17(e.capacity_nats) << ','
        << fmt17(e.capacity_nats * nats_to_bits) << ',' << fmt17(e.shannon_bits)
        << ',' << fmt17(e.mckellips_bits) << ',' << n_atoms << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  auto in = open_in(path);
  expect_header(in, "A,capacity_nats,capacity_bits,shannon_bits,mckellips_bits,n_atoms",
                path);
  std::vector<SweepRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6)
      throw std::runtime_error("expected 6 fields per row in " + path);
    SweepRow row;
    row.peak_bound = parse_double(fields[0], path);
    row.capacity_nats = parse_double(fields[1], path);
    row.capacity_bits = parse_double(fields[2], path);
    row.shannon_bits = parse_double(fields[3], path);
    row.mckellips_bits = parse_double(fields[4], path);
    row.n_atoms = static_cast<int>(parse_double(fields[5], path));
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Minimal hand-emitted SVG canvas: fixed 800x600 frame, margins for labels,
// five ticks per axis.
class SvgCanvas {
 public:
  SvgCanvas(double xmin, double xmax, double ymin, double ymax) {
    const double xpad = pad(xmin, xmax);
    const double ypad = pad(ymin, ymax);
    xmin_ = xmin - xpad;
    xmax_ = xmax + xpad;
    ymin_ = ymin - ypad;
    ymax_ = ymax + ypad;
  }

  double px(double x) const {
    return left_ + (x - xmin_) / (xmax_ - xmin_) * (right_ - left_);
  }
  double py(double y) const {
    return bottom_ - (y - ymin_) / (ymax_ - ymin_) * (bottom_ - top_);
  }

  void circle(double x, double y, double r, const std::string& fill,
              double opacity = 1.0) {
    body_ << "  <circle cx=\"" << fmt_short(px(x)) << "\" cy=\""
          << fmt_short(py(y)) << "\" r=\"" << fmt_short(r) << "\" fill=\""
          << fill << "\"";
    if (opacity < 1.0) body_ << " fill-opacity=\"" << fmt_short(opacity) << "\"";
    body_ << "/>\n";
  }

  void line(double x1, double y1, double x2, double y2,
            const std::string& stroke, const std::string& extra = "") {
    body_ << "  <line x1=\"" << fmt_short(px(x1)) << "\" y1=\""
          << fmt_short(py(y1)) << "\" x2=\"" << fmt_short(px(x2)) << "\" y2=\""
          << fmt_short(py(y2)) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"1.5\"" << extra << "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, const std::string& extra = "") {
    body_ << "  <polyline fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"1.5\"" << extra << " points=\"";
    for (const auto& [x, y] : pts)
      body_ << fmt_short(px(x)) << ',' << fmt_short(py(y)) << ' ';
    body_ << "\"/>\n";
  }

  void legend(int slot, const std::string& color, const std::string& label) {
    const double y = top_ + 18.0 + 20.0 * slot;
    body_ << "  <rect x=\"" << right_ - 170.0 << "\" y=\"" << y - 9.0
          << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
          << "  <text x=\"" << right_ - 152.0 << "\" y=\"" << y + 2.0
          << "\" font-family=\"sans-serif\" font-size=\"13\">" << label
          << "</text>\n";
  }

  void write(const std::string& path, const std::string& x_label,
             const std::string& y_label) {
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
           "viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n"
        << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n"
        << "  <rect x=\"" << left_ << "\" y=\"" << top_ << "\" width=\""
        << right_ - left_ << "\" height=\"" << bottom_ - top_
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int i = 0; i < 5; ++i) {
      const double fx = xmin_ + (xmax_ - xmin_) * i / 4.0;
      const double fy = ymin_ + (ymax_ - ymin_) * i / 4.0;
      const double sx = px(fx);
      const double sy = py(fy);
      out << "  <line x1=\"" << fmt_short(sx) << "\" y1=\"" << bottom_
          << "\" x2=\"" << fmt_short(sx) << "\" y2=\"" << bottom_ + 6.0
          << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
          << "  <text x=\"" << fmt_short(sx) << "\" y=\"" << bottom_ + 22.0
          << "\" font-family=\"sans-serif\" font-size=\"12\" "
             "text-anchor=\"middle\">"
          << fmt_tick(fx) << "</text>\n"
          << "  <line x1=\"" << left_ - 6.0 << "\" y1=\"" << fmt_short(sy)
          << "\" x2=\"" << left_ << "\" y2=\"" << fmt_short(sy)
          << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
          << "  <text x=\"" << left_ - 10.0 << "\" y=\"" << fmt_short(sy + 4.0)
          << "\" font-family=\"sans-serif\" font-size=\"12\" "
             "text-anchor=\"end\">"
          << fmt_tick(fy) << "</text>\n";
    }
    out << "  <text x=\"" << (left_ + right_) / 2.0 << "\" y=\"" << bottom_ + 48.0
        << "\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\">"
        << x_label << "</text>\n"
        << "  <text x=\"24\" y=\"" << (top_ + bottom_) / 2.0
        << "\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 24 "
        << (top_ + bottom_) / 2.0 << ")\">" << y_label << "</text>\n"
        << body_.str() << "</svg>\n";
    if (!out) throw std::runtime_error("write failed for " + path);
  }

 private:
  static double pad(double lo, double hi) {
    const double span = hi - lo;
    return span > 0.0 ? 0.05 * span : std::max(0.5, std::abs(lo) * 0.1);
  }

  double left_ = 90.0, right_ = 760.0, top_ = 40.0, bottom_ = 520.0;
  double xmin_, xmax_, ymin_, ymax_;
  std::ostringstream body_;
};

}  // namespace

void write_pmf_svg(const Pmf& pmf, const std::string& path,
                   const std::string& x_label) {
  validate(pmf);
  SvgCanvas canvas(pmf.support.minCoeff(), pmf.support.maxCoeff(), 0.0,
                   pmf.mass.maxCoeff());
  for (Eigen::Index i = 0; i < pmf.size(); ++i) {
    canvas.line(pmf.support(i), 0.0, pmf.support(i), pmf.mass(i), "#336699");
    canvas.circle(pmf.support(i), pmf.mass(i), 3.0 + 12.0 * pmf.mass(i),
                  "#336699");
  }
  canvas.write(path, x_label, "mass");
}

void write_trace_svg(const CapacityTrace& trace, const std::string& path,
                     std::optional<double> reference_nats) {
  if (trace.entries.empty())
    throw std::invalid_argument("write_trace_svg: empty trace");
  const std::size_t n = trace.entries.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 1600);
  std::vector<std::pair<double, double>> pts;
  double ymin = trace.entries[0].capacity_nats, ymax = ymin;
  for (std::size_t i = 0; i < n; i += stride) {
    const double c = trace.entries[i].capacity_nats;
    pts.emplace_back(static_cast<double>(i + 1), c);
    ymin = std::min(ymin, c);
    ymax = std::max(ymax, c);
  }
  if (reference_nats) {
    ymin = std::min(ymin, *reference_nats);
    ymax = std::max(ymax, *reference_nats);
  }
  SvgCanvas canvas(1.0, static_cast<double>(n), ymin, ymax);
  canvas.polyline(pts, "#336699");
  if (reference_nats) {
    canvas.line(1.0, *reference_nats, static_cast<double>(n), *reference_nats,
                "#cc3333", " stroke-dasharray=\"6 4\"");
    canvas.legend(0, "#cc3333", "reference");
  }
  canvas.write(path, "generator step", "capacity (nats)");
}

void write_sweep_svg(const SweepResult& result, const std::string& path) {
  if (result.entries.empty())
    throw std::invalid_argument("write_sweep_svg: empty sweep");
  double xmin = result.entries.front().peak_bound, xmax = xmin;
  double ymin = 0.0, ymax = 0.0;
  for (const SweepEntry& e : result.entries) {
    xmin = std::min(xmin, e.peak_bound);
    xmax = std::max(xmax, e.peak_bound);
    ymax = std::max({ymax, e.shannon_bits, e.mckellips_bits});
    if (!e.diverged) ymax = std::max(ymax, e.capacity_nats * nats_to_bits);
  }
  SvgCanvas canvas(xmin, xmax, ymin, ymax);
  std::vector<std::pair<double, double>> shannon, mckellips;
  for (const SweepEntry& e : result.entries) {
    shannon.emplace_back(e.peak_bound, e.shannon_bits);
    mckellips.emplace_back(e.peak_bound, e.mckellips_bits);
  }
  canvas.polyline(shannon, "#888888", " stroke-dasharray=\"6 4\"");
  canvas.polyline(mckellips, "#cc3333");
  for (const SweepEntry& e : result.entries)
    if (!e.diverged)
      canvas.circle(e.peak_bound, e.capacity_nats * nats_to_bits, 5.0, "#336699");
  canvas.legend(0, "#336699", "learned capacity");
  canvas.legend(1, "#cc3333", "sphere-packing bound");
  canvas.legend(2, "#888888", "power-only bound");
  canvas.write(path, "peak amplitude", "capacity (bits)");
}

void write_bifurcation_svg(const SweepResult& result, const std::string& path) {
  if (result.entries.empty())
    throw std::invalid_argument("write_bifurcation_svg: empty sweep");
  double xmin = result.entries.front().peak_bound, xmax = xmin;
  double ymin = 0.0, ymax = 0.0;
  for (const SweepEntry& e : result.entries) {
    xmin = std::min(xmin, e.peak_bound);
    xmax = std::max(xmax, e.peak_bound);
    if (e.diverged) continue;
    ymin = std::min(ymin, e.pmf.support.minCoeff());
    ymax = std::max(ymax, e.pmf.support.maxCoeff());
  }
  SvgCanvas canvas(xmin, xmax, ymin, ymax);
  for (const SweepEntry& e : result.entries) {
    if (e.diverged) continue;
    for (Eigen::Index i = 0; i < e.pmf.size(); ++i)
      canvas.circle(e.peak_bound, e.pmf.support(i), 2.0 + 10.0 * e.pmf.mass(i),
                    "#336699");
  }
  canvas.write(path, "peak amplitude", "atom position");
}

void write_scatter_svg(const Matrix& points, const std::string& path,
                       const std::string& x_label, const std::string& y_label) {
  if (points.rows() == 0 || points.cols() != 2)
    throw std::invalid_argument("write_scatter_svg: points must be non-empty with 2 columns");
  const Eigen::Index n = points.rows();
  const Eigen::Index stride = std::max<Eigen::Index>(1, n / 2000);
  SvgCanvas canvas(points.col(0).minCoeff(), points.col(0).maxCoeff(),
                   points.col(1).minCoeff(), points.col(1).maxCoeff());
  for (Eigen::Index i = 0; i < n; i += stride)
    canvas.circle(points(i, 0), points(i, 1), 2.0, "#336699", 0.35);
  canvas.write(path, x_label, y_label);
}

}  // namespace cortical
