#include "cortical/trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cortical {

namespace {

bool positive_head(const MlpConfig& config) {
  return config.output_activation == OutputActivation::Softplus ||
         config.output_activation == OutputActivation::Sigmoid;
}

// Config-only variant for reading the pre-head output through mlp_forward;
// parameter values flow from the tape leaves, so the copied weights are inert.
Mlp pre_head_view(const Mlp& mlp) {
  Mlp view = mlp;
  view.config.output_activation = OutputActivation::Identity;
  return view;
}

// alpha * mean(log D(x,y)) - mean(D(x,y~)) with the paired logarithm taken on
// the discriminator's pre-head output. A softplus or sigmoid head underflows
// to zero for very negative pre-activations -- heavy-tailed channels reach
// them routinely -- which would kill both the log and the gradient that pulls
// the discriminator back; the fused form stays exact with slope approaching 1.
Var value_from_logits(Var logits_p, Var d_u, OutputActivation head,
                      double alpha) {
  Var log_dp = head == OutputActivation::Softplus ? log_softplus(logits_p)
                                                  : log_sigmoid(logits_p);
  return sub(scale(mean_all(log_dp), alpha), mean_all(d_u));
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix rows_at(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

void check_batch_alignment(const Matrix& x, const Matrix& y_paired,
                           const Matrix& y_unpaired) {
  if (x.rows() != y_paired.rows() || x.rows() != y_unpaired.rows())
    throw std::invalid_argument("discriminator_objective: row counts differ");
}

void validate_train_config(const TrainConfig& config) {
  if (config.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (config.disc_steps_per_gen < 1)
    throw std::invalid_argument("train: disc_steps_per_gen must be >= 1");
  if (config.batch < 2) throw std::invalid_argument("train: batch must be >= 2");
  if (!(config.alpha > 0.0))
    throw std::invalid_argument("train: alpha must be > 0");
  if (config.latent_dim < 1)
    throw std::invalid_argument("train: latent_dim must be >= 1");
  if (config.capacity_window < 1)
    throw std::invalid_argument("train: capacity_window must be >= 1");
  if (!(config.lr_gen > 0.0) || !(config.lr_disc > 0.0))
    throw std::invalid_argument("train: learning rates must be > 0");
  if (!(config.lr_floor >= 0.0) || config.lr_floor > 1.0)
    throw std::invalid_argument("train: lr_floor must be in [0, 1]");
  if (!(config.grad_clip > 0.0))
    throw std::invalid_argument("train: grad_clip must be > 0");
}

}  // namespace

std::vector<int> derange(int m, Rng& rng) {
  if (m < 2) throw std::invalid_argument("derange: need m >= 2");
  // Cyclic shift by k in {1..m-1}: no index maps to itself.
  int k = 1 + static_cast<int>(rng.uniform() * (m - 1));
  if (k > m - 1) k = m - 1;
  std::vector<int> perm(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    perm[static_cast<std::size_t>(i)] = (i + k) % m;
  return perm;
}

double estimate_capacity(double value, double alpha) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("estimate_capacity: alpha must be > 0");
  return value / alpha + 1.0 - std::log(alpha);
}

double value_function(const Eigen::VectorXd& d_paired,
                      const Eigen::VectorXd& d_unpaired, double alpha) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("value_function: alpha must be > 0");
  if (d_paired.size() == 0 || d_paired.size() != d_unpaired.size())
    throw std::invalid_argument("value_function: batch sizes differ or empty");
  if (d_paired.minCoeff() < 0.0)
    throw std::runtime_error(
        "value_function: negative paired discriminator output");
  const double log_term =
      d_paired.array().max(1e-8).log().mean();
  return alpha * log_term - d_unpaired.mean();
}

Var value_function(Tape& tape, Var d_paired, Var d_unpaired, double alpha) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("value_function: alpha must be > 0");
  if (d_paired.value().size() == 0 ||
      d_paired.value().rows() != d_unpaired.value().rows())
    throw std::invalid_argument("value_function: batch sizes differ or empty");
  if (d_paired.value().minCoeff() < 0.0)
    throw std::runtime_error(
        "value_function: negative paired discriminator output");
  (void)tape;
  Var log_term = mean_all(log(clamp_min(d_paired, 1e-8)));
  return sub(scale(log_term, alpha), mean_all(d_unpaired));
}

double discriminator_objective(const Mlp& discriminator, const Matrix& x,
                               const Matrix& y_paired, const Matrix& y_unpaired,
                               double alpha) {
  check_batch_alignment(x, y_paired, y_unpaired);
  const Matrix d_p = mlp_forward(discriminator, concat_cols(x, y_paired));
  const Matrix d_u = mlp_forward(discriminator, concat_cols(x, y_unpaired));
  return value_function(d_p.col(0), d_u.col(0), alpha);
}

Matrix generator_output(const Mlp& generator, const Matrix& z,
                        const ChannelModel& model, const ConstraintSpec& spec) {
  Matrix x = mlp_forward(generator, z);
  if (spec.peak_bound && spec.peak_mode == PeakMode::Project) {
    const double bound = *spec.peak_bound;
    if (model.kind == ChannelKind::Mimo) {
      // Constraint acts on the faded signal: shrink rows of diag(h) x.
      Matrix u = x;
      u.col(0) *= model.mimo_diag(0);
      u.col(1) *= model.mimo_diag(1);
      u = project_peak(u, bound);
      u.col(0) /= model.mimo_diag(0);
      u.col(1) /= model.mimo_diag(1);
      x = u;
    } else {
      x = project_peak(x, bound);
    }
  }
  return x;
}

Var generator_output(Tape& tape, const Mlp& generator, const MlpVars& params,
                     Var z, const ChannelModel& model,
                     const ConstraintSpec& spec) {
  (void)tape;
  Var x = mlp_forward(generator, params, z);
  if (spec.peak_bound && spec.peak_mode == PeakMode::Project) {
    const double bound = *spec.peak_bound;
    if (model.kind == ChannelKind::Mimo) {
      Eigen::RowVectorXd h = model.mimo_diag.transpose();
      Eigen::RowVectorXd h_inv = h.cwiseInverse();
      x = scale_cols(project_ball(scale_cols(x, h), bound), h_inv);
    } else {
      x = project_ball(x, bound);
    }
  }
  return x;
}

double generator_objective(const Mlp& generator, const Mlp& discriminator,
                           const ChannelModel& model, const Matrix& z,
                           double alpha, const ConstraintSpec& spec,
                           Rng& channel_rng, Rng& derangement_rng) {
  const Matrix x = generator_output(generator, z, model, spec);
  const Matrix y = channel_apply(model, x, channel_rng);
  const std::vector<int> perm =
      derange(static_cast<int>(z.rows()), derangement_rng);
  const double j =
      discriminator_objective(discriminator, x, y, rows_at(y, perm), alpha);
  return j - constraint_penalty(x, spec);
}

TrainResult train(const TrainConfig& config, const ChannelModel& model,
                  const ConstraintSpec& spec, const MlpConfig& gen_config,
                  const MlpConfig& disc_config) {
  validate_train_config(config);
  validate(gen_config);
  validate(disc_config);
  validate(spec);
  if (!spec.any_constraint())
    throw std::invalid_argument("train: at least one input constraint required");
  if (gen_config.input_dim != config.latent_dim)
    throw std::invalid_argument("train: generator input_dim != latent_dim");
  if (gen_config.output_dim != model.dim)
    throw std::invalid_argument("train: generator output_dim != channel dim");
  const int joint_dim = model.dim + channel_output_dim(model);
  if (disc_config.input_dim != joint_dim)
    throw std::invalid_argument(
        "train: discriminator input_dim must equal input dim + output dim");
  if (disc_config.output_dim != 1)
    throw std::invalid_argument("train: discriminator output_dim must be 1");
  if (!positive_head(disc_config))
    throw std::invalid_argument(
        "train: discriminator needs a positive output head");

  Rng master(config.seed);
  Mlp gen = mlp_new(gen_config, master.stream_seed(0));
  Mlp disc = mlp_new(disc_config, master.stream_seed(1));
  const Mlp disc_pre = pre_head_view(disc);
  Rng latent_rng = master.split(2);
  Rng channel_rng = master.split(3);
  Rng derangement_rng = master.split(4);

  AdamState gen_state = adam_new(gen, config.lr_gen, config.adam_beta1,
                                 config.adam_beta2);
  AdamState disc_state = adam_new(disc, config.lr_disc, config.adam_beta1,
                                  config.adam_beta2);

  CapacityTrace trace;
  trace.entries.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 1; step <= config.steps; ++step) {
    // Linear anneal toward lr_floor: late-stage optimizer jitter smears the
    // learned input distribution, and the atoms only sharpen as it dies down.
    const double anneal =
        config.steps == 1
            ? 1.0
            : 1.0 - (1.0 - config.lr_floor) * (step - 1) /
                        static_cast<double>(config.steps - 1);
    disc_state.learning_rate = config.lr_disc * anneal;
    gen_state.learning_rate = config.lr_gen * anneal;
    try {
      for (int k = 0; k < config.disc_steps_per_gen; ++k) {
        const Matrix z = latent_rng.normal_matrix(config.batch, config.latent_dim);
        const Matrix x = generator_output(gen, z, model, spec);
        const Matrix y = channel_apply(model, x, channel_rng);
        const std::vector<int> perm = derange(config.batch, derangement_rng);

        Tape tape;
        MlpVars dv = mlp_params(tape, disc, true);
        Var logit_p =
            mlp_forward(disc_pre, dv, tape.constant(concat_cols(x, y)));
        Var d_u = mlp_forward(disc, dv,
                              tape.constant(concat_cols(x, rows_at(y, perm))));
        Var j = value_from_logits(logit_p, d_u,
                                  disc_config.output_activation, config.alpha);
        if (!std::isfinite(j.scalar()))
          throw std::runtime_error("discriminator objective not finite");
        tape.backward(j);
        MlpGrads grads = read_grads(dv);
        clip_grad_norm(grads, config.grad_clip);
        adam_step(disc, grads, disc_state, /*maximize=*/true);
      }

      const Matrix z = latent_rng.normal_matrix(config.batch, config.latent_dim);
      Tape tape;
      MlpVars gv = mlp_params(tape, gen, true);
      MlpVars dv = mlp_params(tape, disc, false);
      Var x = generator_output(tape, gen, gv, tape.constant(z), model, spec);
      Var y = channel_apply(model, x, channel_rng);
      const std::vector<int> perm = derange(config.batch, derangement_rng);
      Var logit_p = mlp_forward(disc_pre, dv, hstack(x, y));
      Var d_u = mlp_forward(disc, dv, hstack(x, permute_rows(y, perm)));
      Var j = value_from_logits(logit_p, d_u, disc_config.output_activation,
                                config.alpha);
      Var penalty = constraint_penalty(tape, x, spec);
      Var objective = sub(j, penalty);
      if (!std::isfinite(j.scalar()) || !std::isfinite(penalty.scalar()))
        throw std::runtime_error("generator objective not finite");
      tape.backward(objective);
      MlpGrads grads = read_grads(gv);
      clip_grad_norm(grads, config.grad_clip);
      adam_step(gen, grads, gen_state, /*maximize=*/true);

      trace.entries.push_back({j.scalar(),
                               estimate_capacity(j.scalar(), config.alpha),
                               penalty.scalar()});
    } catch (const DivergenceError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw DivergenceError(step, e.what());
    }
  }

  const std::size_t n = trace.entries.size();
  const std::size_t window =
      std::min(n, static_cast<std::size_t>(config.capacity_window));
  double acc = 0.0;
  for (std::size_t i = n - window; i < n; ++i)
    acc += trace.entries[i].capacity_nats;
  trace.final_capacity_nats = acc / static_cast<double>(window);

  return {std::move(gen), std::move(disc), std::move(trace)};
}

double discriminator_mi_estimate(const PairedSampler& sampler,
                                 const MlpConfig& disc_config,
                                 const MiEstimateConfig& config) {
  validate(disc_config);
  if (disc_config.output_dim != 1)
    throw std::invalid_argument(
        "discriminator_mi_estimate: discriminator output_dim must be 1");
  if (!positive_head(disc_config))
    throw std::invalid_argument(
        "discriminator_mi_estimate: discriminator needs a positive output head");
  if (config.steps < 1 || config.batch < 2 || config.eval_batch < 2)
    throw std::invalid_argument("discriminator_mi_estimate: bad step/batch sizes");
  if (!(config.alpha > 0.0))
    throw std::invalid_argument("discriminator_mi_estimate: alpha must be > 0");

  Rng master(config.seed);
  Mlp disc = mlp_new(disc_config, master.stream_seed(1));
  const Mlp disc_pre = pre_head_view(disc);
  Rng data_rng = master.split(2);
  Rng derangement_rng = master.split(4);
  AdamState state = adam_new(disc, config.lr, config.adam_beta1,
                             config.adam_beta2);

  for (int step = 1; step <= config.steps; ++step) {
    auto [x, y] = sampler(config.batch, data_rng);
    if (x.rows() != config.batch || y.rows() != config.batch)
      throw std::runtime_error("discriminator_mi_estimate: sampler batch mismatch");
    const std::vector<int> perm = derange(config.batch, derangement_rng);

    Tape tape;
    MlpVars dv = mlp_params(tape, disc, true);
    Var logit_p =
        mlp_forward(disc_pre, dv, tape.constant(concat_cols(x, y)));
    Var d_u = mlp_forward(disc, dv,
                          tape.constant(concat_cols(x, rows_at(y, perm))));
    Var j = value_from_logits(logit_p, d_u, disc_config.output_activation,
                              config.alpha);
    if (!std::isfinite(j.scalar()))
      throw DivergenceError(step, "discriminator objective not finite");
    tape.backward(j);
    MlpGrads grads = read_grads(dv);
    clip_grad_norm(grads, config.grad_clip);
    adam_step(disc, grads, state, /*maximize=*/true);
  }

  auto [x, y] = sampler(config.eval_batch, data_rng);
  const std::vector<int> perm = derange(config.eval_batch, derangement_rng);
  const double j = discriminator_objective(disc, x, y, rows_at(y, perm),
                                           config.alpha);
  return estimate_capacity(j, config.alpha);
}

PairedSampler gaussian_pair_sampler(double rho) {
  if (!(std::abs(rho) < 1.0))
    throw std::invalid_argument("gaussian_pair_sampler: need |rho| < 1");
  return [rho](int batch, Rng& rng) {
    Matrix x = rng.normal_matrix(batch, 1);
    Matrix noise = rng.normal_matrix(batch, 1);
    Matrix y = rho * x + std::sqrt(1.0 - rho * rho) * noise;
    return std::make_pair(std::move(x), std::move(y));
  };
}

}  // namespace cortical
