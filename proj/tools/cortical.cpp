#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cortical/baselines.hpp"
#include "cortical/experiments.hpp"

using namespace cortical;

namespace {

// Exit statuses, one per failure class.
constexpr int kOk = 0;
constexpr int kCheckFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDivergence = 3;
constexpr int kIoError = 4;

void print_usage(std::ostream& out) {
  out << "usage: cortical <command> [config-file] [key=value ...] [--key value ...]\n"
         "\n"
         "commands:\n"
         "  run    [config|experiment] ...   train one experiment, write artifacts\n"
         "         experiments: awgn-peak, mimo-peak, cauchy-log, cauchy-peak, rayleigh\n"
         "  sweep  [config|experiment] ...   peak-bound sweep (awgn-peak), grid=0.5,1.0,...\n"
         "  baseline ba <bsc|awgn-peak|rayleigh|noiseless> [p=|A=|a=|M=] [--out DIR]\n"
         "  baseline bounds [A=1] [d=1]      closed-form capacity bounds\n"
         "  check grad [seed=0]              gradient finite-difference self-test\n"
         "  check discriminator [rho=0.5]    density-ratio MI recovery self-test\n"
         "\n"
         "common keys: steps, disc_steps, batch, alpha, latent_dim, seed,\n"
         "  capacity_window, lr_gen, lr_disc, lr_floor, beta1, beta2, grad_clip, out,\n"
         "  eval_samples, merge_tol; channel keys: A, gamma, r2, a\n"
         "shortcuts: --out DIR, --seed N\n"
         "\n"
         "exit status: 0 ok, 1 check failure, 2 bad config, 3 divergence, 4 io error\n";
}

struct ParsedArgs {
  KeyValues pairs;                      // key=value and --key value assignments
  std::vector<std::string> positional;  // bare words (subcommands, config path)
};

ParsedArgs parse_args(const std::vector<std::string>& tokens) {
  ParsedArgs parsed;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t.rfind("--", 0) == 0) {
      const std::string key = t.substr(2);
      if (key.empty()) throw ConfigError("empty option name '--'");
      if (i + 1 >= tokens.size())
        throw ConfigError("option '--" + key + "' needs a value");
      parsed.pairs.emplace_back(key, tokens[++i]);
    } else if (const auto eq = t.find('='); eq != std::string::npos) {
      const std::string key = t.substr(0, eq);
      const std::string value = t.substr(eq + 1);
      if (key.empty() || value.empty())
        throw ConfigError("malformed assignment '" + t + "'");
      parsed.pairs.emplace_back(key, value);
    } else {
      parsed.positional.push_back(t);
    }
  }
  return parsed;
}

bool is_experiment_name(const std::string& name) {
  try {
    parse_experiment(name);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config_text(in);
}

ExperimentConfig config_from_args(const ParsedArgs& parsed, bool allow_grid) {
  KeyValues pairs;
  std::string config_path;
  for (const std::string& word : parsed.positional) {
    if (is_experiment_name(word)) {
      pairs.emplace_back("experiment", word);
    } else if (config_path.empty()) {
      config_path = word;
    } else {
      throw ConfigError("unexpected argument '" + word + "'");
    }
  }
  if (!config_path.empty()) {
    KeyValues file_pairs = read_config_file(config_path);
    // Command-line assignments override file assignments.
    file_pairs.insert(file_pairs.end(), pairs.begin(), pairs.end());
    pairs = std::move(file_pairs);
  }
  pairs.insert(pairs.end(), parsed.pairs.begin(), parsed.pairs.end());
  return build_experiment_config(pairs, allow_grid);
}

int cmd_run(const std::vector<std::string>& tokens) {
  const ExperimentConfig config = config_from_args(parse_args(tokens), false);
  const RunArtifacts art = run_experiment(config);
  std::printf("experiment      %s\n", experiment_name(config.kind).c_str());
  std::printf("capacity_nats   %.6f\n", art.capacity_nats);
  std::printf("capacity_bits   %.6f\n", art.capacity_nats * nats_to_bits);
  std::printf("n_atoms         %d\n", static_cast<int>(art.pmf.size()));
  if (art.phase_ks >= 0.0) {
    std::printf("phase_ks        %.6f\n", art.phase_ks);
    std::printf("n_clusters      %d\n", art.n_clusters);
  }
  if (art.cauchy_ks >= 0.0) std::printf("cauchy_ks       %.6f\n", art.cauchy_ks);
  std::printf("wall_seconds    %.1f\n", art.wall_seconds);
  std::printf("artifacts in    %s\n", config.out_dir.c_str());
  return kOk;
}

int cmd_sweep(const std::vector<std::string>& tokens) {
  const ExperimentConfig config = config_from_args(parse_args(tokens), true);
  const SweepResult result = run_sweep(config);
  std::printf("%8s %14s %14s %8s\n", "A", "capacity_bits", "mckellips_bits",
              "n_atoms");
  for (const SweepEntry& e : result.entries) {
    if (e.diverged)
      std::printf("%8.3f %14s %14.6f %8s\n", e.peak_bound, "diverged",
                  e.mckellips_bits, "-");
    else
      std::printf("%8.3f %14.6f %14.6f %8d\n", e.peak_bound,
                  e.capacity_nats * nats_to_bits, e.mckellips_bits,
                  static_cast<int>(e.pmf.size()));
  }
  std::printf("artifacts in    %s\n", config.out_dir.c_str());
  return kOk;
}

// Numeric parameters of the baseline/check subcommands, validated by name.
std::map<std::string, double> numeric_params(const KeyValues& pairs,
                                             std::map<std::string, double> defaults,
                                             std::string* out_dir) {
  for (const auto& [key, value] : pairs) {
    if (key == "out" && out_dir) {
      *out_dir = value;
      continue;
    }
    const auto it = defaults.find(key);
    if (it == defaults.end()) throw ConfigError("unknown key '" + key + "'");
    try {
      std::size_t pos = 0;
      it->second = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': cannot parse number '" + value + "'");
    }
  }
  return defaults;
}

void write_ba_pmf(const BaResult& result, const Eigen::VectorXd& grid,
                  const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<double> support, mass;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (result.input_pmf(i) > 1e-12) {
      support.push_back(grid(i));
      mass.push_back(result.input_pmf(i));
    }
  }
  Pmf pmf;
  pmf.support = Eigen::Map<Eigen::VectorXd>(support.data(),
                                            static_cast<Eigen::Index>(support.size()));
  pmf.mass = Eigen::Map<Eigen::VectorXd>(mass.data(),
                                         static_cast<Eigen::Index>(mass.size()));
  pmf.mass /= pmf.mass.sum();
  const std::string path =
      (std::filesystem::path(out_dir) / "pmf.csv").string();
  write_pmf_csv(pmf, path);
  std::printf("input pmf in    %s\n", path.c_str());
}

void print_ba(const BaResult& result) {
  std::printf("capacity_nats   %.9f\n", result.capacity_nats);
  std::printf("capacity_bits   %.9f\n", result.capacity_nats * nats_to_bits);
  std::printf("converged       %s\n", result.converged ? "yes" : "no");
  std::printf("iterations      %d\n", result.iterations);
}

int cmd_baseline(const std::vector<std::string>& tokens) {
  const ParsedArgs parsed = parse_args(tokens);
  if (parsed.positional.empty())
    throw ConfigError("baseline needs a subcommand: ba or bounds");
  const std::string& sub = parsed.positional[0];

  if (sub == "bounds") {
    if (parsed.positional.size() > 1)
      throw ConfigError("unexpected argument '" + parsed.positional[1] + "'");
    const auto params =
        numeric_params(parsed.pairs, {{"A", 1.0}, {"d", 1.0}}, nullptr);
    const int d = static_cast<int>(params.at("d"));
    std::printf("shannon_bits    %.9f\n",
                shannon_awgn_bound_bits(params.at("A"), d));
    if (d == 1)
      std::printf("mckellips_bits  %.9f\n", mckellips_bound_bits(params.at("A")));
    return kOk;
  }

  if (sub != "ba")
    throw ConfigError("unknown baseline subcommand '" + sub + "'");
  if (parsed.positional.size() < 2)
    throw ConfigError("baseline ba needs a channel: bsc, awgn-peak, rayleigh, "
                      "or noiseless");
  if (parsed.positional.size() > 2)
    throw ConfigError("unexpected argument '" + parsed.positional[2] + "'");
  const std::string& channel = parsed.positional[1];
  std::string out_dir;

  if (channel == "bsc") {
    const auto params = numeric_params(parsed.pairs, {{"p", 0.1}}, &out_dir);
    const DiscretizedChannel ch = bsc_channel(params.at("p"));
    const BaResult result = blahut_arimoto(ch);
    print_ba(result);
    if (!out_dir.empty()) write_ba_pmf(result, ch.input_grid, out_dir);
    return kOk;
  }
  if (channel == "awgn-peak") {
    const auto params = numeric_params(parsed.pairs, {{"A", 1.0}}, &out_dir);
    const BaResult result = awgn_peak_ba(params.at("A"));
    print_ba(result);
    if (!out_dir.empty())
      write_ba_pmf(result, discretize_awgn_peak(params.at("A")).input_grid,
                   out_dir);
    return kOk;
  }
  if (channel == "rayleigh") {
    const auto params = numeric_params(parsed.pairs, {{"a", 1.0}}, &out_dir);
    const BaResult result = rayleigh_ba(params.at("a"));
    print_ba(result);
    if (!out_dir.empty())
      write_ba_pmf(result, discretize_rayleigh().input_grid, out_dir);
    return kOk;
  }
  if (channel == "noiseless") {
    const auto params = numeric_params(parsed.pairs, {{"M", 4.0}}, &out_dir);
    const DiscretizedChannel ch =
        noiseless_channel(static_cast<int>(params.at("M")));
    const BaResult result = blahut_arimoto(ch);
    print_ba(result);
    if (!out_dir.empty()) write_ba_pmf(result, ch.input_grid, out_dir);
    return kOk;
  }
  if (channel == "mimo")
    throw ConfigError("no discretized oracle for the mimo channel; use the "
                      "closed-form bounds instead");
  throw ConfigError("unknown baseline channel '" + channel + "'");
}

int check_grad(std::uint64_t seed) {
  const double worst = randomized_gradient_check(seed, 20);
  std::printf("max gradient error over 20 architectures: %.3g (limit 1e-4)\n",
              worst);
  return worst < 1e-4 ? kOk : kCheckFailure;
}

int check_discriminator(double rho, std::uint64_t seed) {
  MiEstimateConfig config;
  config.seed = seed;
  MlpConfig disc;
  disc.input_dim = 2;
  disc.hidden_layers = {64, 64};
  disc.output_dim = 1;
  disc.output_activation = OutputActivation::Softplus;

  const double estimate =
      discriminator_mi_estimate(gaussian_pair_sampler(rho), disc, config);
  const double expected = gaussian_mi_analytic(rho);
  const double tol = rho == 0.0 ? 0.01 : 0.05 * expected;
  std::printf("rho             %.3f\n", rho);
  std::printf("mi_estimate     %.6f nats\n", estimate);
  std::printf("mi_analytic     %.6f nats\n", expected);
  std::printf("tolerance       %.6f\n", tol);
  return std::abs(estimate - expected) <= tol ? kOk : kCheckFailure;
}

int cmd_check(const std::vector<std::string>& tokens) {
  const ParsedArgs parsed = parse_args(tokens);
  if (parsed.positional.empty())
    throw ConfigError("check needs a subcommand: grad or discriminator");
  const std::string& sub = parsed.positional[0];
  if (parsed.positional.size() > 1)
    throw ConfigError("unexpected argument '" + parsed.positional[1] + "'");

  if (sub == "grad") {
    const auto params = numeric_params(parsed.pairs, {{"seed", 0.0}}, nullptr);
    return check_grad(static_cast<std::uint64_t>(params.at("seed")));
  }
  if (sub == "discriminator") {
    const auto params =
        numeric_params(parsed.pairs, {{"rho", 0.5}, {"seed", 0.0}}, nullptr);
    const double rho = params.at("rho");
    if (!(rho >= 0.0 && rho < 1.0))
      throw ConfigError("key 'rho' must be in [0, 1)");
    return check_discriminator(rho, static_cast<std::uint64_t>(params.at("seed")));
  }
  throw ConfigError("unknown check subcommand '" + sub + "'");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> tokens(argv + 1, argv + argc);
  if (tokens.empty() || tokens[0] == "--help" || tokens[0] == "-h" ||
      tokens[0] == "help") {
    print_usage(tokens.empty() ? std::cerr : std::cout);
    return tokens.empty() ? kConfigError : kOk;
  }

  const std::string command = tokens[0];
  const std::vector<std::string> rest(tokens.begin() + 1, tokens.end());
  try {
    if (command == "run") return cmd_run(rest);
    if (command == "sweep") return cmd_sweep(rest);
    if (command == "baseline") return cmd_baseline(rest);
    if (command == "check") return cmd_check(rest);
    std::cerr << "unknown command '" << command << "'\n\n";
    print_usage(std::cerr);
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
}
