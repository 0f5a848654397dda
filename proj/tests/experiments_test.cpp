#include "cortical/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cortical/baselines.hpp"

using namespace cortical;

namespace {

std::string slurp_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the wall-time line so deterministic reruns compare byte-identical.
std::string without_wall_time(const std::string& json_text) {
  std::string out;
  std::istringstream in(json_text);
  std::string line;
  while (std::getline(in, line))
    if (line.find("wall_time_seconds") == std::string::npos) out += line + "\n";
  return out;
}

ExperimentConfig tiny_config(ExperimentKind kind, const std::string& out_dir) {
  ExperimentConfig config = default_experiment_config(kind);
  config.train.steps = 25;
  config.train.disc_steps_per_gen = 2;
  config.train.batch = 64;
  config.train.capacity_window = 10;
  config.train.seed = 41;
  config.eval_samples = 2000;
  config.out_dir = out_dir;
  return config;
}

}  // namespace

TEST_CASE("experiment names round trip and reject strangers") {
  for (ExperimentKind kind :
       {ExperimentKind::AwgnPeak, ExperimentKind::MimoPeak,
        ExperimentKind::CauchyLog, ExperimentKind::CauchyPeak,
        ExperimentKind::Rayleigh})
    CHECK(parse_experiment(experiment_name(kind)) == kind);
  CHECK_THROWS_AS(parse_experiment("awgn"), ConfigError);
  CHECK_THROWS_AS(parse_experiment(""), ConfigError);
}

TEST_CASE("config text parsing handles comments, blanks, and whitespace") {
  std::istringstream in(
      "# full-line comment\n"
      "\n"
      "experiment = cauchy-log   # trailing comment\n"
      "  A=2.5\n"
      "steps =  500\n");
  const KeyValues pairs = parse_config_text(in);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::pair<std::string, std::string>("experiment", "cauchy-log"));
  CHECK(pairs[1] == std::pair<std::string, std::string>("A", "2.5"));
  CHECK(pairs[2] == std::pair<std::string, std::string>("steps", "500"));
}

TEST_CASE("config text parsing rejects malformed lines") {
  std::istringstream no_eq("steps 500\n");
  CHECK_THROWS_AS(parse_config_text(no_eq), ConfigError);
  std::istringstream empty_key("= 3\n");
  CHECK_THROWS_AS(parse_config_text(empty_key), ConfigError);
  std::istringstream empty_value("steps =   # nothing\n");
  CHECK_THROWS_AS(parse_config_text(empty_value), ConfigError);
}

TEST_CASE("experiment defaults follow the chosen scenario") {
  const ExperimentConfig awgn =
      default_experiment_config(ExperimentKind::AwgnPeak);
  CHECK(awgn.peak_bound == 1.0);
  CHECK(awgn.train.latent_dim == 1);
  CHECK(awgn.train.steps == 10000);

  const ExperimentConfig mimo =
      default_experiment_config(ExperimentKind::MimoPeak);
  CHECK(mimo.train.latent_dim == 2);

  const ExperimentConfig cauchy_log =
      default_experiment_config(ExperimentKind::CauchyLog);
  CHECK(cauchy_log.peak_bound == 2.0);
  CHECK(cauchy_log.cauchy_scale == 1.0);
  CHECK(cauchy_log.train.steps == 10000);
}

TEST_CASE("later config assignments override earlier ones") {
  const KeyValues pairs = {{"experiment", "awgn-peak"},
                           {"A", "1.0"},
                           {"steps", "100"},
                           {"A", "2.5"},
                           {"seed", "7"}};
  const ExperimentConfig config = build_experiment_config(pairs, false);
  CHECK(config.kind == ExperimentKind::AwgnPeak);
  CHECK(config.peak_bound == 2.5);
  CHECK(config.train.steps == 100);
  CHECK(config.train.seed == 7);
}

TEST_CASE("unknown and inapplicable config keys are rejected by name") {
  CHECK_THROWS_WITH_AS(build_experiment_config({{"bogus", "1"}}, false),
                       doctest::Contains("bogus"), ConfigError);
  // gamma means nothing on the scalar Gaussian experiment.
  CHECK_THROWS_WITH_AS(
      build_experiment_config({{"experiment", "awgn-peak"}, {"gamma", "1"}}, false),
      doctest::Contains("gamma"), ConfigError);
  CHECK_THROWS_AS(
      build_experiment_config({{"experiment", "rayleigh"}, {"A", "1"}}, false),
      ConfigError);
  CHECK_THROWS_AS(
      build_experiment_config({{"experiment", "awgn-peak"}, {"r2", "3"}}, false),
      ConfigError);
  // grid belongs to the sweep command only.
  CHECK_THROWS_WITH_AS(build_experiment_config({{"grid", "0.5,1.0"}}, false),
                       doctest::Contains("grid"), ConfigError);
}

TEST_CASE("config values are validated") {
  CHECK_THROWS_AS(build_experiment_config({{"A", "zero"}}, false), ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"A", "-1"}}, false), ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"steps", "3.5"}}, false), ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"eval_samples", "10"}}, false),
                  ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"merge_tol", "-0.1"}}, false),
                  ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"grid", "1.0,,2.0"}}, true),
                  ConfigError);
  CHECK_THROWS_AS(build_experiment_config({{"grid", "1.0,-2.0"}}, true),
                  ConfigError);
}

TEST_CASE("sweep configs parse the grid and default it when absent") {
  const ExperimentConfig with_grid =
      build_experiment_config({{"grid", "0.5, 1.0, 2.5"}}, true);
  CHECK(with_grid.grid == std::vector<double>{0.5, 1.0, 2.5});

  const ExperimentConfig defaulted = build_experiment_config({}, true);
  CHECK(defaulted.grid == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
}

TEST_CASE("experiment wiring matches the scenario") {
  ExperimentConfig awgn = default_experiment_config(ExperimentKind::AwgnPeak);
  CHECK(experiment_channel(awgn).kind == ChannelKind::Awgn);
  CHECK(experiment_constraint(awgn).peak_mode == PeakMode::Project);
  CHECK(experiment_generator_config(awgn).output_activation ==
        OutputActivation::Identity);
  CHECK(experiment_discriminator_config(awgn).input_dim == 2);
  CHECK(experiment_discriminator_config(awgn).output_activation ==
        OutputActivation::Softplus);

  ExperimentConfig mimo = default_experiment_config(ExperimentKind::MimoPeak);
  mimo.mimo_fade = 3.0;
  CHECK(experiment_channel(mimo).kind == ChannelKind::Mimo);
  CHECK(experiment_channel(mimo).mimo_diag(1) == 3.0);
  CHECK(experiment_generator_config(mimo).output_dim == 2);
  CHECK(experiment_discriminator_config(mimo).input_dim == 4);

  ExperimentConfig cauchy_log = default_experiment_config(ExperimentKind::CauchyLog);
  CHECK(experiment_channel(cauchy_log).kind == ChannelKind::Cauchy);
  CHECK(experiment_constraint(cauchy_log).log_power.has_value());
  CHECK_FALSE(experiment_constraint(cauchy_log).peak_bound.has_value());

  ExperimentConfig cauchy_peak = default_experiment_config(ExperimentKind::CauchyPeak);
  CHECK(experiment_constraint(cauchy_peak).peak_bound.has_value());
  CHECK(experiment_constraint(cauchy_peak).peak_mode == PeakMode::Project);

  ExperimentConfig rayleigh = default_experiment_config(ExperimentKind::Rayleigh);
  CHECK(experiment_channel(rayleigh).kind == ChannelKind::RayleighEquiv);
  CHECK(experiment_constraint(rayleigh).inverse_moment_bound.has_value());
  CHECK(experiment_generator_config(rayleigh).output_activation ==
        OutputActivation::Sigmoid);
}

TEST_CASE("running an experiment writes the full artifact set deterministically") {
  const std::string dir_a = "/tmp/cortical_exp_a";
  const std::string dir_b = "/tmp/cortical_exp_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  ExperimentConfig config = tiny_config(ExperimentKind::AwgnPeak, dir_a);
  const RunArtifacts art_a = run_experiment(config);
  config.out_dir = dir_b;
  const RunArtifacts art_b = run_experiment(config);

  for (const std::string name :
       {"trace.csv", "trace.svg", "pmf.csv", "pmf.svg", "summary.json"}) {
    CHECK(std::filesystem::exists(dir_a + "/" + name));
  }

  CHECK(std::isfinite(art_a.capacity_nats));
  CHECK(art_a.capacity_nats == art_b.capacity_nats);
  CHECK(without_wall_time(art_a.summary_json) ==
        without_wall_time(art_b.summary_json));
  CHECK(slurp_file(dir_a + "/pmf.csv") == slurp_file(dir_b + "/pmf.csv"));
  CHECK(slurp_file(dir_a + "/trace.csv") == slurp_file(dir_b + "/trace.csv"));

  const auto summary = nlohmann::json::parse(art_a.summary_json);
  CHECK(summary.at("experiment") == "awgn-peak");
  CHECK(summary.at("seed") == 41);
  CHECK(summary.at("channel").at("A") == 1.0);
  CHECK(summary.at("capacity_nats").get<double>() == art_a.capacity_nats);
  CHECK(summary.at("capacity_bits").get<double>() ==
        doctest::Approx(art_a.capacity_nats * nats_to_bits));
  CHECK(summary.at("nats_to_bits").get<double>() == nats_to_bits);
  CHECK(summary.at("n_atoms").get<int>() == static_cast<int>(art_a.pmf.size()));
  CHECK(summary.at("shannon_bits").get<double>() ==
        shannon_awgn_bound_bits(1.0, 1));
  CHECK(summary.at("mckellips_bits").get<double>() == mckellips_bound_bits(1.0));
  CHECK(summary.contains("wall_time_seconds"));

  // Peak projection keeps every atom inside the bound.
  CHECK(art_a.pmf.support.cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
}

TEST_CASE("rayleigh runs report the fading pmf in both spaces") {
  const std::string dir = "/tmp/cortical_exp_rayleigh";
  std::filesystem::remove_all(dir);
  const RunArtifacts art =
      run_experiment(tiny_config(ExperimentKind::Rayleigh, dir));

  const Pmf s_space = read_pmf_csv(dir + "/pmf.csv");
  const Pmf u_space = read_pmf_csv(dir + "/pmf_u.csv");
  REQUIRE(s_space.size() == art.pmf.size());
  REQUIRE(u_space.size() == s_space.size());
  CHECK((s_space.support.array() > 0.0).all());
  CHECK((s_space.support.array() <= 1.0).all());
  const Eigen::Index n = s_space.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = s_space.support(n - 1 - i);
    CHECK(u_space.support(i) ==
          doctest::Approx(std::sqrt(1.0 / s - 1.0)).epsilon(1e-12));
    CHECK(u_space.mass(i) == s_space.mass(n - 1 - i));
  }
  CHECK(std::filesystem::exists(dir + "/pmf_u.svg"));
}

TEST_CASE("mimo runs report phase statistics, clusters, and a scatter plot") {
  const std::string dir = "/tmp/cortical_exp_mimo";
  std::filesystem::remove_all(dir);
  ExperimentConfig config = tiny_config(ExperimentKind::MimoPeak, dir);
  config.mimo_fade = 3.0;
  const RunArtifacts art = run_experiment(config);

  CHECK(art.phase_ks >= 0.0);
  CHECK(art.n_clusters >= 1);
  CHECK(std::filesystem::exists(dir + "/scatter.svg"));
  const auto summary = nlohmann::json::parse(art.summary_json);
  CHECK(summary.at("channel").at("r2") == 3.0);
  CHECK(summary.contains("phase_ks"));
  CHECK(summary.contains("n_clusters"));
  // Elliptical projection: the faded signal obeys the peak bound.
  const Pmf magnitude = read_pmf_csv(dir + "/pmf.csv");
  CHECK(magnitude.support.maxCoeff() <= config.peak_bound + 1e-9);
}

TEST_CASE("cauchy-log runs record the goodness-of-fit numbers") {
  const std::string dir = "/tmp/cortical_exp_cauchylog";
  std::filesystem::remove_all(dir);
  ExperimentConfig config = tiny_config(ExperimentKind::CauchyLog, dir);
  const RunArtifacts art = run_experiment(config);
  CHECK(art.cauchy_ks >= 0.0);
  CHECK(art.cauchy_ks <= 1.0);
  const auto summary = nlohmann::json::parse(art.summary_json);
  CHECK(summary.at("cauchy_reference_scale") == 1.0);  // A - gamma
  CHECK(summary.at("cauchy_ks_samples") == 2000);
  CHECK(summary.at("analytic_capacity_nats").get<double>() ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("sweeps write the grid artifacts and reject other experiments") {
  const std::string dir = "/tmp/cortical_exp_sweep";
  std::filesystem::remove_all(dir);
  ExperimentConfig config = tiny_config(ExperimentKind::AwgnPeak, dir);
  config.grid = {0.8, 1.2};
  const SweepResult result = run_sweep(config);
  REQUIRE(result.entries.size() == 2);
  const auto rows = read_sweep_csv(dir + "/sweep.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].peak_bound == 0.8);
  CHECK(rows[1].peak_bound == 1.2);
  CHECK(std::filesystem::exists(dir + "/bifurcation.svg"));
  CHECK(std::filesystem::exists(dir + "/capacity.svg"));

  ExperimentConfig wrong = tiny_config(ExperimentKind::Rayleigh, dir);
  wrong.grid = {1.0};
  CHECK_THROWS_AS(run_sweep(wrong), ConfigError);
}
