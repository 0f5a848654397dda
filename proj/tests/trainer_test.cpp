#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "cortical/baselines.hpp"
#include "cortical/trainer.hpp"

using namespace cortical;

namespace {

MlpConfig gen_config(int latent, int out) {
  MlpConfig cfg;
  cfg.input_dim = latent;
  cfg.hidden_layers = {32, 32};
  cfg.output_dim = out;
  return cfg;
}

MlpConfig disc_config(int joint) {
  MlpConfig cfg;
  cfg.input_dim = joint;
  cfg.hidden_layers = {32, 32};
  cfg.output_dim = 1;
  cfg.output_activation = OutputActivation::Softplus;
  return cfg;
}

// log of the bivariate-normal density ratio p(x,y)/(p(x)p(y)) at correlation rho
double log_gauss_ratio(double x, double y, double rho) {
  const double r2 = rho * rho;
  return -0.5 * std::log(1.0 - r2) -
         (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * (1.0 - r2));
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("derangement of two elements is the swap") {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto p = derange(2, rng);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == 1);
    CHECK(p[1] == 0);
  }
  CHECK_THROWS(derange(1, rng));
}

TEST_CASE("derangement never fixes a point and is a permutation") {
  Rng rng(2);
  for (int m : {2, 3, 5, 17, 64}) {
    for (int rep = 0; rep < 50; ++rep) {
      auto p = derange(m, rng);
      std::set<int> seen(p.begin(), p.end());
      CHECK(static_cast<int>(seen.size()) == m);
      for (int i = 0; i < m; ++i) CHECK(p[i] != i);
    }
  }
}

TEST_CASE("derangement shifts are uniform over 1..m-1") {
  Rng rng(3);
  const int m = 5, draws = 10000;
  std::vector<int> count(m, 0);
  for (int i = 0; i < draws; ++i) {
    auto p = derange(m, rng);
    ++count[static_cast<std::size_t>(p[0])];  // p[0] = shift k
  }
  CHECK(count[0] == 0);
  for (int k = 1; k < m; ++k)
    CHECK(std::abs(count[k] / double(draws) - 0.25) < 0.02);
}

TEST_CASE("capacity readout inverts the value identity") {
  CHECK(estimate_capacity(-1.0, 1.0) == doctest::Approx(0.0));
  for (double alpha : {0.5, 1.0, 2.0, 5.0})
    for (double c : {0.0, 0.3, 0.7}) {
      const double j = alpha * (c + std::log(alpha) - 1.0);
      CHECK(estimate_capacity(j, alpha) == doctest::Approx(c));
    }
  CHECK_THROWS(estimate_capacity(0.0, 0.0));
}

TEST_CASE("value function on constant discriminator outputs") {
  const int m = 8;
  for (double alpha : {1.0, 2.0}) {
    Eigen::VectorXd d = Eigen::VectorXd::Constant(m, alpha);
    // alpha log alpha - alpha
    CHECK(value_function(d, d, alpha) ==
          doctest::Approx(alpha * std::log(alpha) - alpha));
  }
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
  CHECK(value_function(ones, ones, 1.0) == doctest::Approx(-1.0));
}

TEST_CASE("value function hand example and error surface") {
  Eigen::VectorXd d_p = Eigen::VectorXd::Constant(2, std::numbers::e);
  Eigen::VectorXd d_u(2);
  d_u << 2.0, 4.0;
  CHECK(value_function(d_p, d_u, 1.0) == doctest::Approx(1.0 - 3.0));
  CHECK(value_function(d_p, d_u, 2.0) == doctest::Approx(2.0 - 3.0));
  Eigen::VectorXd bad(2);
  bad << 1.0, -0.5;
  CHECK_THROWS(value_function(bad, d_u, 1.0));
  CHECK_THROWS(value_function(Eigen::VectorXd::Zero(0), d_u, 1.0));

  // An underflowed (exactly zero) head output clamps into the floor.
  Eigen::VectorXd with_zero(2);
  with_zero << 1.0, 0.0;
  const double floored = 0.5 * std::log(1e-8) - 3.0;
  CHECK(value_function(with_zero, d_u, 1.0) == doctest::Approx(floored));
  Tape tape;
  Var vp = tape.leaf(with_zero), vu = tape.leaf(d_u);
  CHECK(value_function(tape, vp, vu, 1.0).scalar() == doctest::Approx(floored));
}

TEST_CASE("graph value function matches the plain one and differentiates") {
  Rng rng(4);
  Eigen::VectorXd d_p = rng.uniform_matrix(16, 1, 0.2, 3.0);
  Eigen::VectorXd d_u = rng.uniform_matrix(16, 1, 0.2, 3.0);
  Tape tape;
  Var vp = tape.leaf(d_p), vu = tape.leaf(d_u);
  Var j = value_function(tape, vp, vu, 1.5);
  CHECK(j.scalar() == doctest::Approx(value_function(d_p, d_u, 1.5)));
  tape.backward(j);
  // d/d d_p = alpha / (m d_p); d/d d_u = -1/m
  for (int i = 0; i < 16; ++i) {
    CHECK(vp.grad()(i, 0) == doctest::Approx(1.5 / (16.0 * d_p(i))));
    CHECK(vu.grad()(i, 0) == doctest::Approx(-1.0 / 16.0));
  }
}

TEST_CASE("exact density ratio recovers the gaussian value") {
  // J at the optimal discriminator = MI - 1 for alpha = 1
  const double rho = 0.5;
  Rng rng(5);
  const int m = 1000000;
  Eigen::VectorXd d_p(m), d_u(m);
  auto sampler = gaussian_pair_sampler(rho);
  auto [x, y] = sampler(m, rng);
  Rng der(6);
  auto perm = derange(m, der);
  for (int i = 0; i < m; ++i) {
    d_p(i) = std::exp(log_gauss_ratio(x(i, 0), y(i, 0), rho));
    d_u(i) = std::exp(log_gauss_ratio(x(i, 0), y(perm[static_cast<std::size_t>(i)], 0), rho));
  }
  const double j = value_function(d_p, d_u, 1.0);
  const double expected = gaussian_mi_analytic(rho) - 1.0;  // about -0.8562
  CHECK(std::abs(j - expected) < 0.01);
  CHECK(estimate_capacity(j, 1.0) ==
        doctest::Approx(gaussian_mi_analytic(rho)).epsilon(0.1));
}

TEST_CASE("discriminator objective on a constant-output network") {
  // zero weights and softplus(b) = alpha makes D constant at alpha
  for (double alpha : {1.0, 1.7}) {
    MlpConfig cfg = disc_config(2);
    Mlp d = mlp_new(cfg, 7);
    for (auto& w : d.weights) w.setZero();
    for (auto& b : d.biases) b.setZero();
    d.biases.back()(0, 0) = std::log(std::exp(alpha) - 1.0);
    Rng rng(8);
    Matrix x = rng.normal_matrix(32, 1), y = rng.normal_matrix(32, 1);
    CHECK(discriminator_objective(d, x, y, y, alpha) ==
          doctest::Approx(alpha * std::log(alpha) - alpha));
  }
}

TEST_CASE("generator output projection keeps every sample feasible") {
  ChannelModel model = awgn_channel(2);
  ConstraintSpec spec = peak_constraint(1.5, PeakMode::Project);
  Mlp g = mlp_new(gen_config(2, 2), 9);
  for (auto& w : g.weights) w *= 10.0;  // force violations pre-projection
  Rng rng(10);
  Matrix z = rng.normal_matrix(256, 2);
  Matrix x = generator_output(g, z, model, spec);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    CHECK(x.row(i).norm() <= 1.5 + 1e-12);
  // penalty mode leaves outputs untouched
  ConstraintSpec soft = peak_constraint(1.5, PeakMode::Penalty);
  Matrix raw = generator_output(g, z, model, soft);
  CHECK(raw.isApprox(mlp_forward(g, z)));
}

TEST_CASE("mimo projection constrains the faded signal") {
  ChannelModel model = mimo_channel(3.0);
  ConstraintSpec spec = peak_constraint(1.0, PeakMode::Project);
  Mlp g = mlp_new(gen_config(2, 2), 11);
  for (auto& w : g.weights) w *= 10.0;
  Rng rng(12);
  Matrix z = rng.normal_matrix(256, 2);
  Matrix x = generator_output(g, z, model, spec);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Vector2d faded(x(i, 0), 3.0 * x(i, 1));
    CHECK(faded.norm() <= 1.0 + 1e-12);
  }
}

TEST_CASE("generator objective reduces to the two-term value without constraints") {
  ChannelModel model = awgn_channel(1);
  Mlp g = mlp_new(gen_config(1, 1), 13);
  Mlp d = mlp_new(disc_config(2), 14);
  Rng latent(15);
  Matrix z = latent.normal_matrix(64, 1);
  ConstraintSpec none;
  Rng ch1(16), der1(17);
  const double full = generator_objective(g, d, model, z, 1.0, none, ch1, der1);
  // manual replay with identical streams
  Rng ch2(16), der2(17);
  Matrix x = generator_output(g, z, model, none);
  Matrix y = channel_apply(model, x, ch2);
  auto perm = derange(64, der2);
  Matrix y_u(64, 1);
  for (int i = 0; i < 64; ++i) y_u.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
  CHECK(full == doctest::Approx(discriminator_objective(d, x, y, y_u, 1.0)));
}

TEST_CASE("a uniform peak violation shifts the objective by exactly delta") {
  ChannelModel model = awgn_channel(1);
  Mlp g = mlp_new(gen_config(1, 1), 18);
  for (auto& w : g.weights) w.setZero();
  for (auto& b : g.biases) b.setZero();
  g.biases.back()(0, 0) = 2.0;  // constant output x = 2, squared norm 4
  Mlp d = mlp_new(disc_config(2), 19);
  Rng latent(20);
  Matrix z = latent.normal_matrix(64, 1);
  const double delta = 0.75;
  ConstraintSpec tight = peak_constraint(std::sqrt(4.0 - delta));  // hinge = delta
  ConstraintSpec none;
  Rng c1(21), d1(22), c2(21), d2(22);
  const double with_pen = generator_objective(g, d, model, z, 1.0, tight, c1, d1);
  const double without = generator_objective(g, d, model, z, 1.0, none, c2, d2);
  CHECK(without - with_pen == doctest::Approx(delta));
}

TEST_CASE("wider gaussian input scores higher against an ideal discriminator") {
  // awgn with x ~ N(0,P): J* = 0.5 ln(1+P) - 1 increases in P
  Rng rng(23);
  const int m = 200000;
  auto j_for_power = [&](double power) {
    Matrix x = rng.normal_matrix(m, 1) * std::sqrt(power);
    Rng noise(24);
    ChannelModel model = awgn_channel(1);
    Matrix y = channel_apply(model, x, noise);
    Rng der(25);
    auto perm = derange(m, der);
    const double rho = std::sqrt(power / (power + 1.0));
    const double sy = std::sqrt(power + 1.0);
    Eigen::VectorXd d_p(m), d_u(m);
    for (int i = 0; i < m; ++i) {
      d_p(i) = std::exp(log_gauss_ratio(x(i, 0) / std::sqrt(power),
                                        y(i, 0) / sy, rho));
      d_u(i) = std::exp(log_gauss_ratio(x(i, 0) / std::sqrt(power),
                                        y(perm[static_cast<std::size_t>(i)], 0) / sy, rho));
    }
    return value_function(d_p, d_u, 1.0);
  };
  const double narrow = j_for_power(1.0);
  const double wide = j_for_power(4.0);
  CHECK(narrow == doctest::Approx(0.5 * std::log(2.0) - 1.0).epsilon(0.05));
  CHECK(wide == doctest::Approx(0.5 * std::log(5.0) - 1.0).epsilon(0.05));
  CHECK(wide > narrow + 0.3);
}

TEST_CASE("generator gradients through channel and projection pass finite differences") {
  struct Case {
    ChannelModel model;
    ConstraintSpec spec;
    OutputActivation head;
  };
  std::vector<Case> cases;
  cases.push_back({awgn_channel(1), peak_constraint(0.1), OutputActivation::Identity});
  cases.push_back({cauchy_channel(1.0), log_power_constraint(2.0, 1.0), OutputActivation::Identity});
  cases.push_back({rayleigh_equiv_channel(), inverse_moment_constraint(0.01), OutputActivation::Sigmoid});
  cases.push_back({mimo_channel(2.0), peak_constraint(10.0, PeakMode::Project), OutputActivation::Identity});

  for (const auto& c : cases) {
    // tanh keeps the loss smooth so central differences are trustworthy; the
    // relu path is gradient-checked in the mlp suite.
    MlpConfig gcfg = gen_config(c.model.dim, c.model.dim);
    gcfg.hidden_layers = {8};
    gcfg.hidden_activation = Activation::Tanh;
    gcfg.output_activation = c.head;
    Mlp g = mlp_new(gcfg, 26);
    MlpConfig dcfg = disc_config(c.model.dim + channel_output_dim(c.model));
    dcfg.hidden_layers = {8};
    dcfg.hidden_activation = Activation::Tanh;
    Mlp d = mlp_new(dcfg, 27);
    Rng latent(28);
    const Matrix z = latent.normal_matrix(16, c.model.dim);

    auto loss = [&](Tape& tape, const MlpVars& gv) {
      MlpVars dv = mlp_params(tape, d, false);
      Var x = generator_output(tape, g, gv, tape.constant(z), c.model, c.spec);
      Rng noise(29);  // frozen draws make the objective deterministic in params
      Var y = channel_apply(c.model, x, noise);
      Rng der(30);
      auto perm = derange(16, der);
      Var d_p = mlp_forward(d, dv, hstack(x, y));
      Var d_u = mlp_forward(d, dv, hstack(x, permute_rows(y, perm)));
      Var j = value_function(tape, d_p, d_u, 1.0);
      return sub(j, constraint_penalty(tape, x, c.spec));
    };
    CHECK(finite_diff_check(g, loss, 1e-5) < 1e-4);
  }
}

TEST_CASE("training runs, records the identity, and reproduces bit for bit") {
  TrainConfig cfg;
  cfg.steps = 25;
  cfg.disc_steps_per_gen = 2;
  cfg.batch = 64;
  cfg.capacity_window = 10;
  cfg.seed = 31;
  ChannelModel model = awgn_channel(1);
  ConstraintSpec spec = peak_constraint(1.0, PeakMode::Project);
  MlpConfig gcfg = gen_config(1, 1), dcfg = disc_config(2);

  TrainResult a = train(cfg, model, spec, gcfg, dcfg);
  REQUIRE(a.trace.entries.size() == 25);
  for (const auto& e : a.trace.entries) {
    CHECK(std::isfinite(e.value));
    CHECK(e.capacity_nats == estimate_capacity(e.value, cfg.alpha));
    CHECK(e.penalty == 0.0);  // projection mode keeps the hinge silent
  }
  double tail = 0.0;
  for (std::size_t i = 15; i < 25; ++i) tail += a.trace.entries[i].capacity_nats;
  CHECK(a.trace.final_capacity_nats == doctest::Approx(tail / 10.0).epsilon(1e-12));

  TrainResult b = train(cfg, model, spec, gcfg, dcfg);
  for (std::size_t i = 0; i < 25; ++i) {
    CHECK(a.trace.entries[i].value == b.trace.entries[i].value);
    CHECK(a.trace.entries[i].capacity_nats == b.trace.entries[i].capacity_nats);
  }
  for (std::size_t l = 0; l < a.generator.layer_count(); ++l)
    CHECK(a.generator.weights[l] == b.generator.weights[l]);

  cfg.seed = 32;
  TrainResult c = train(cfg, model, spec, gcfg, dcfg);
  CHECK(a.trace.entries[0].value != c.trace.entries[0].value);

  // trained generator emits feasible samples
  Rng probe(33);
  Matrix x = generator_output(a.generator, probe.normal_matrix(512, 1), model, spec);
  CHECK((x.array().abs() <= 1.0 + 1e-12).all());
}

TEST_CASE("train validates its configuration") {
  TrainConfig cfg;
  cfg.steps = 1;
  ChannelModel model = awgn_channel(1);
  ConstraintSpec spec = peak_constraint(1.0);
  MlpConfig gcfg = gen_config(1, 1), dcfg = disc_config(2);

  TrainConfig bad = cfg;
  bad.alpha = 0.0;
  CHECK_THROWS(train(bad, model, spec, gcfg, dcfg));
  bad = cfg;
  bad.batch = 1;
  CHECK_THROWS(train(bad, model, spec, gcfg, dcfg));

  CHECK_THROWS(train(cfg, model, ConstraintSpec{}, gcfg, dcfg));  // no constraint

  MlpConfig wrong_disc = disc_config(3);  // joint dim is 2
  CHECK_THROWS(train(cfg, model, spec, gcfg, wrong_disc));

  MlpConfig identity_head = disc_config(2);
  identity_head.output_activation = OutputActivation::Identity;
  CHECK_THROWS(train(cfg, model, spec, gcfg, identity_head));

  MlpConfig wrong_gen = gen_config(1, 2);  // channel dim is 1
  CHECK_THROWS(train(cfg, model, spec, wrong_gen, dcfg));
}

TEST_CASE("divergence error carries the step index") {
  DivergenceError e(17, "boom");
  CHECK(e.step == 17);
  CHECK(std::string(e.what()).find("17") != std::string::npos);
}

TEST_CASE("discriminator-only estimate recovers a small gaussian mi") {
  MiEstimateConfig cfg;
  cfg.steps = 800;
  cfg.batch = 256;
  cfg.eval_batch = 50000;
  cfg.seed = 34;
  MlpConfig dcfg = disc_config(2);
  const double est = discriminator_mi_estimate(gaussian_pair_sampler(0.5), dcfg, cfg);
  CHECK(std::abs(est - gaussian_mi_analytic(0.5)) < 0.03);
}

}  // TEST_SUITE
