#include "cortical/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "cortical/baselines.hpp"

namespace cortical {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double pi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    if (!std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number '" + value + "'");
  }
}

int parse_int_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

std::uint64_t parse_seed_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse seed '" + value + "'");
  }
}

std::vector<double> parse_grid_value(const std::string& value) {
  std::vector<double> grid;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config key 'grid': empty list entry");
    grid.push_back(parse_double_value("grid", item));
  }
  if (grid.empty()) throw ConfigError("config key 'grid': empty list");
  return grid;
}

bool key_applies(ExperimentKind kind, const std::string& key) {
  if (key == "A")
    return kind != ExperimentKind::Rayleigh;
  if (key == "gamma")
    return kind == ExperimentKind::CauchyLog || kind == ExperimentKind::CauchyPeak;
  if (key == "r2") return kind == ExperimentKind::MimoPeak;
  if (key == "a") return kind == ExperimentKind::Rayleigh;
  return true;
}

}  // namespace

ExperimentKind parse_experiment(const std::string& name) {
  if (name == "awgn-peak") return ExperimentKind::AwgnPeak;
  if (name == "mimo-peak") return ExperimentKind::MimoPeak;
  if (name == "cauchy-log") return ExperimentKind::CauchyLog;
  if (name == "cauchy-peak") return ExperimentKind::CauchyPeak;
  if (name == "rayleigh") return ExperimentKind::Rayleigh;
  throw ConfigError("unknown experiment '" + name +
                    "' (expected awgn-peak, mimo-peak, cauchy-log, cauchy-peak, "
                    "or rayleigh)");
}

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::AwgnPeak: return "awgn-peak";
    case ExperimentKind::MimoPeak: return "mimo-peak";
    case ExperimentKind::CauchyLog: return "cauchy-log";
    case ExperimentKind::CauchyPeak: return "cauchy-peak";
    case ExperimentKind::Rayleigh: return "rayleigh";
  }
  throw std::invalid_argument("unreachable experiment kind");
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
  ExperimentConfig config;
  config.kind = kind;
  // Atom identification needs a sharply converged generator: the spread left
  // between atoms mid-training fills the gaps the extraction relies on.
  config.train.steps = 10000;
  switch (kind) {
    case ExperimentKind::AwgnPeak:
      break;
    case ExperimentKind::MimoPeak:
      config.train.latent_dim = 2;
      break;
    case ExperimentKind::CauchyLog:
      config.peak_bound = 2.0;
      break;
    case ExperimentKind::CauchyPeak:
      break;
    case ExperimentKind::Rayleigh:
      break;
  }
  return config;
}

KeyValues parse_config_text(std::istream& in) {
  KeyValues pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key or value");
    pairs.emplace_back(key, value);
  }
  return pairs;
}

ExperimentConfig build_experiment_config(const KeyValues& pairs, bool allow_grid) {
  ExperimentKind kind = ExperimentKind::AwgnPeak;
  for (const auto& [key, value] : pairs)
    if (key == "experiment") kind = parse_experiment(value);

  ExperimentConfig config = default_experiment_config(kind);
  for (const auto& [key, value] : pairs) {
    if (key == "experiment") continue;
    if (!key_applies(kind, key))
      throw ConfigError("config key '" + key + "' does not apply to experiment '" +
                        experiment_name(kind) + "'");
    if (key == "A") config.peak_bound = parse_double_value(key, value);
    else if (key == "gamma") config.cauchy_scale = parse_double_value(key, value);
    else if (key == "r2") config.mimo_fade = parse_double_value(key, value);
    else if (key == "a") config.inverse_moment = parse_double_value(key, value);
    else if (key == "grid") {
      if (!allow_grid)
        throw ConfigError("config key 'grid' only applies to the sweep command");
      config.grid = parse_grid_value(value);
    } else if (key == "steps") config.train.steps = parse_int_value(key, value);
    else if (key == "disc_steps")
      config.train.disc_steps_per_gen = parse_int_value(key, value);
    else if (key == "batch") config.train.batch = parse_int_value(key, value);
    else if (key == "alpha") config.train.alpha = parse_double_value(key, value);
    else if (key == "latent_dim")
      config.train.latent_dim = parse_int_value(key, value);
    else if (key == "seed") config.train.seed = parse_seed_value(key, value);
    else if (key == "capacity_window")
      config.train.capacity_window = parse_int_value(key, value);
    else if (key == "lr_gen") config.train.lr_gen = parse_double_value(key, value);
    else if (key == "lr_disc") config.train.lr_disc = parse_double_value(key, value);
    else if (key == "lr_floor") config.train.lr_floor = parse_double_value(key, value);
    else if (key == "beta1") config.train.adam_beta1 = parse_double_value(key, value);
    else if (key == "beta2") config.train.adam_beta2 = parse_double_value(key, value);
    else if (key == "grad_clip")
      config.train.grad_clip = parse_double_value(key, value);
    else if (key == "out") config.out_dir = value;
    else if (key == "eval_samples")
      config.eval_samples = parse_int_value(key, value);
    else if (key == "merge_tol")
      config.merge_tol = parse_double_value(key, value);
    else
      throw ConfigError("unknown config key '" + key + "'");
  }

  if (!(config.peak_bound > 0.0)) throw ConfigError("config key 'A' must be positive");
  if (!(config.cauchy_scale > 0.0))
    throw ConfigError("config key 'gamma' must be positive");
  if (!(config.mimo_fade > 0.0)) throw ConfigError("config key 'r2' must be positive");
  if (!(config.inverse_moment > 0.0))
    throw ConfigError("config key 'a' must be positive");
  if (config.eval_samples < 1000)
    throw ConfigError("config key 'eval_samples' must be at least 1000");
  if (config.merge_tol < 0.0)
    throw ConfigError("config key 'merge_tol' must be nonnegative");
  for (double A : config.grid)
    if (!(A > 0.0)) throw ConfigError("config key 'grid': bounds must be positive");
  if (allow_grid && config.grid.empty())
    config.grid = {0.5, 1.0, 1.5, 2.0, 2.5};
  return config;
}

ChannelModel experiment_channel(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::AwgnPeak: return awgn_channel(1);
    case ExperimentKind::MimoPeak: return mimo_channel(config.mimo_fade);
    case ExperimentKind::CauchyLog: return cauchy_channel(config.cauchy_scale);
    case ExperimentKind::CauchyPeak: return cauchy_channel(config.cauchy_scale);
    case ExperimentKind::Rayleigh: return rayleigh_equiv_channel();
  }
  throw std::invalid_argument("unreachable experiment kind");
}

ConstraintSpec experiment_constraint(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::AwgnPeak:
    case ExperimentKind::MimoPeak:
    case ExperimentKind::CauchyPeak:
      return peak_constraint(config.peak_bound, PeakMode::Project);
    case ExperimentKind::CauchyLog:
      return log_power_constraint(config.peak_bound, config.cauchy_scale);
    case ExperimentKind::Rayleigh:
      return inverse_moment_constraint(config.inverse_moment);
  }
  throw std::invalid_argument("unreachable experiment kind");
}

MlpConfig experiment_generator_config(const ExperimentConfig& config) {
  MlpConfig gen;
  gen.input_dim = config.train.latent_dim;
  gen.hidden_layers = {64, 64};
  gen.output_dim = config.kind == ExperimentKind::MimoPeak ? 2 : 1;
  gen.hidden_activation = Activation::Relu;
  gen.output_activation = config.kind == ExperimentKind::Rayleigh
                              ? OutputActivation::Sigmoid
                              : OutputActivation::Identity;
  return gen;
}

MlpConfig experiment_discriminator_config(const ExperimentConfig& config) {
  const ChannelModel model = experiment_channel(config);
  MlpConfig disc;
  disc.input_dim = model.dim + channel_output_dim(model);
  disc.hidden_layers = {64, 64};
  disc.output_dim = 1;
  disc.hidden_activation = Activation::Relu;
  disc.output_activation = OutputActivation::Softplus;
  return disc;
}

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double pmf_merge_tol(const ExperimentConfig& config,
                     const std::vector<double>& samples) {
  if (config.merge_tol > 0.0) return config.merge_tol;
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return default_merge_tol(*hi - *lo);
}

Pmf to_inverse_magnitude_space(const Pmf& s_space) {
  // u = sqrt(1/s - 1) is strictly decreasing on (0, 1], so the order flips.
  const Eigen::Index n = s_space.size();
  Pmf u_space;
  u_space.support.resize(n);
  u_space.mass.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = s_space.support(n - 1 - i);
    u_space.support(i) = std::sqrt(std::max(1.0 / s - 1.0, 0.0));
    u_space.mass(i) = s_space.mass(n - 1 - i);
  }
  validate(u_space);
  return u_space;
}

void write_summary(const std::string& path, ordered_json& summary,
                   double wall_seconds, std::string* bytes_out) {
  summary["wall_time_seconds"] = wall_seconds;
  std::string text = summary.dump(2);
  text.push_back('\n');
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
  if (bytes_out) *bytes_out = std::move(text);
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config) {
  const ChannelModel model = experiment_channel(config);
  const ConstraintSpec spec = experiment_constraint(config);
  const MlpConfig gen_cfg = experiment_generator_config(config);
  const MlpConfig disc_cfg = experiment_discriminator_config(config);

  std::filesystem::create_directories(config.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult trained = train(config.train, model, spec, gen_cfg, disc_cfg);

  Rng eval_rng = Rng(config.train.seed).split(5);
  const Matrix z =
      eval_rng.normal_matrix(config.eval_samples, config.train.latent_dim);
  const Matrix x = generator_output(trained.generator, z, model, spec);
  // Atom structure is identified on a capped subsample; capacity and the
  // Cauchy goodness-of-fit statistic use the full evaluation set.
  const int atom_n = std::min(config.eval_samples, kAtomSampleCap);

  RunArtifacts art;
  art.capacity_nats = trained.trace.final_capacity_nats;
  art.final_penalty = trained.trace.entries.back().penalty;

  ordered_json summary;
  summary["experiment"] = experiment_name(config.kind);
  summary["seed"] = config.train.seed;

  ordered_json channel;
  switch (config.kind) {
    case ExperimentKind::AwgnPeak:
      channel["A"] = config.peak_bound;
      break;
    case ExperimentKind::MimoPeak:
      channel["A"] = config.peak_bound;
      channel["r2"] = config.mimo_fade;
      break;
    case ExperimentKind::CauchyLog:
    case ExperimentKind::CauchyPeak:
      channel["A"] = config.peak_bound;
      channel["gamma"] = config.cauchy_scale;
      break;
    case ExperimentKind::Rayleigh:
      channel["a"] = config.inverse_moment;
      break;
  }
  summary["channel"] = channel;
  summary["train"] = {
      {"steps", config.train.steps},
      {"disc_steps_per_gen", config.train.disc_steps_per_gen},
      {"batch", config.train.batch},
      {"alpha", config.train.alpha},
      {"latent_dim", config.train.latent_dim},
      {"capacity_window", config.train.capacity_window},
      {"lr_gen", config.train.lr_gen},
      {"lr_disc", config.train.lr_disc},
      {"lr_floor", config.train.lr_floor},
  };
  summary["eval_samples"] = config.eval_samples;
  summary["pmf_samples"] = atom_n;
  summary["capacity_nats"] = art.capacity_nats;
  summary["capacity_bits"] = art.capacity_nats * nats_to_bits;
  summary["nats_to_bits"] = nats_to_bits;
  summary["final_penalty"] = art.final_penalty;

  std::string pmf_label = "input value";
  if (config.kind == ExperimentKind::MimoPeak) {
    const Matrix head = x.topRows(atom_n);
    const RadialProfile profile =
        radial_profile(head, model.mimo_diag, config.merge_tol);
    art.pmf = profile.magnitude;
    art.phase_ks = profile.phase_ks;
    Matrix faded = x;
    faded.col(0) *= model.mimo_diag(0);
    faded.col(1) *= model.mimo_diag(1);
    const double cluster_tol =
        config.merge_tol > 0.0 ? config.merge_tol : 0.3 * config.peak_bound;
    art.n_clusters =
        static_cast<int>(cluster_points(faded.topRows(atom_n), cluster_tol).size());
    pmf_label = "signal magnitude";
    write_scatter_svg(faded, join_path(config.out_dir, "scatter.svg"),
                      "first component", "second component");
  } else {
    std::vector<double> samples(x.data(), x.data() + x.rows());
    std::vector<double> atom_head(samples.begin(), samples.begin() + atom_n);
    art.pmf = extract_pmf(atom_head, pmf_merge_tol(config, atom_head));
    if (config.kind == ExperimentKind::Rayleigh) pmf_label = "fading state s";
    if (config.kind == ExperimentKind::CauchyLog &&
        config.peak_bound > config.cauchy_scale) {
      // Matched-scale reference: the log-power constraint is tight exactly for
      // a Cauchy input of scale A - gamma.
      const double scale = config.peak_bound - config.cauchy_scale;
      const int m_ks = std::min(config.eval_samples, 10000);
      std::vector<double> head(samples.begin(), samples.begin() + m_ks);
      art.cauchy_ks = ks_statistic(std::move(head), [scale](double t) {
        return 0.5 + std::atan(t / scale) / pi;
      });
      summary["cauchy_ks"] = art.cauchy_ks;
      summary["cauchy_ks_samples"] = m_ks;
      summary["cauchy_ks_critical_1pct"] = ks_critical_value(m_ks, 0.01);
      summary["cauchy_reference_scale"] = scale;
    }
  }

  summary["n_atoms"] = static_cast<int>(art.pmf.size());
  summary["support"] = std::vector<double>(
      art.pmf.support.data(), art.pmf.support.data() + art.pmf.size());
  summary["mass"] = std::vector<double>(art.pmf.mass.data(),
                                        art.pmf.mass.data() + art.pmf.size());

  switch (config.kind) {
    case ExperimentKind::AwgnPeak:
      summary["shannon_bits"] = shannon_awgn_bound_bits(config.peak_bound, 1);
      summary["mckellips_bits"] = mckellips_bound_bits(config.peak_bound);
      break;
    case ExperimentKind::MimoPeak:
      summary["shannon_bits"] = shannon_awgn_bound_bits(config.peak_bound, 2);
      summary["phase_ks"] = art.phase_ks;
      summary["phase_ks_critical_5pct"] = ks_critical_value(atom_n, 0.05);
      summary["n_clusters"] = art.n_clusters;
      break;
    case ExperimentKind::CauchyLog:
      summary["analytic_capacity_nats"] =
          cauchy_capacity_nats(config.peak_bound, config.cauchy_scale);
      break;
    case ExperimentKind::CauchyPeak:
    case ExperimentKind::Rayleigh:
      break;
  }

  write_trace_csv(trained.trace, join_path(config.out_dir, "trace.csv"));
  write_trace_svg(trained.trace, join_path(config.out_dir, "trace.svg"));
  write_pmf_csv(art.pmf, join_path(config.out_dir, "pmf.csv"));
  write_pmf_svg(art.pmf, join_path(config.out_dir, "pmf.svg"), pmf_label);
  if (config.kind == ExperimentKind::Rayleigh) {
    const Pmf u_space = to_inverse_magnitude_space(art.pmf);
    write_pmf_csv(u_space, join_path(config.out_dir, "pmf_u.csv"));
    write_pmf_svg(u_space, join_path(config.out_dir, "pmf_u.svg"),
                  "equivalent amplitude u");
  }

  const auto t1 = std::chrono::steady_clock::now();
  art.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  write_summary(join_path(config.out_dir, "summary.json"), summary,
                art.wall_seconds, &art.summary_json);
  return art;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  if (config.kind != ExperimentKind::AwgnPeak)
    throw ConfigError("sweep supports only the awgn-peak experiment");
  if (config.grid.empty())
    throw ConfigError("sweep needs a nonempty 'grid'");

  std::filesystem::create_directories(config.out_dir);
  const SweepResult result = bifurcation_sweep(
      config.grid, config.train, experiment_generator_config(config),
      experiment_discriminator_config(config), PeakMode::Project,
      config.eval_samples);
  write_sweep_csv(result, join_path(config.out_dir, "sweep.csv"));
  write_bifurcation_svg(result, join_path(config.out_dir, "bifurcation.svg"));
  write_sweep_svg(result, join_path(config.out_dir, "capacity.svg"));
  return result;
}

}  // namespace cortical
