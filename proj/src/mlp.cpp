#include "cortical/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cortical {

void validate(const MlpConfig& config) {
  if (config.input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
  if (config.output_dim < 1) throw std::invalid_argument("MlpConfig: output_dim must be >= 1");
  if (config.hidden_layers.empty())
    throw std::invalid_argument("MlpConfig: at least one hidden layer required");
  for (int w : config.hidden_layers)
    if (w < 1) throw std::invalid_argument("MlpConfig: hidden widths must be >= 1");
  if (config.output_activation == OutputActivation::TanhScaled &&
      !(config.output_scale > 0.0))
    throw std::invalid_argument("MlpConfig: output_scale must be > 0 for TanhScaled");
}

Mlp mlp_new(const MlpConfig& config, std::uint64_t seed) {
  validate(config);
  Mlp mlp;
  mlp.config = config;
  Rng rng(seed);
  std::vector<int> dims;
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  dims.push_back(config.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    mlp.weights.push_back(rng.uniform_matrix(fan_in, fan_out, -bound, bound));
    mlp.biases.push_back(Matrix::Zero(1, fan_out));
  }
  return mlp;
}

namespace {

void check_batch(const Mlp& mlp, Eigen::Index batch_cols) {
  if (batch_cols != mlp.config.input_dim)
    throw std::invalid_argument("mlp_forward: batch width " +
                                std::to_string(batch_cols) + " != input_dim " +
                                std::to_string(mlp.config.input_dim));
}

}  // namespace

Matrix mlp_forward(const Mlp& mlp, const Matrix& batch) {
  check_batch(mlp, batch.cols());
  Matrix h = batch;
  const std::size_t last = mlp.layer_count() - 1;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    Matrix z = (h * mlp.weights[l]).rowwise() + mlp.biases[l].row(0);
    if (l < last) {
      if (mlp.config.hidden_activation == Activation::Relu)
        h = z.cwiseMax(0.0);
      else
        h = z.array().tanh();
    } else {
      switch (mlp.config.output_activation) {
        case OutputActivation::Identity:
          h = std::move(z);
          break;
        case OutputActivation::Softplus:
          h = z.unaryExpr([](double v) {
            return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
          });
          break;
        case OutputActivation::Sigmoid:
          h = z.unaryExpr([](double v) {
            return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
          });
          break;
        case OutputActivation::TanhScaled:
          h = mlp.config.output_scale * z.array().tanh();
          break;
      }
    }
  }
  if (!h.allFinite())
    throw std::runtime_error("mlp_forward: non-finite output");
  return h;
}

MlpVars mlp_params(Tape& tape, const Mlp& mlp, bool trainable) {
  MlpVars vars;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    vars.weights.push_back(trainable ? tape.leaf(mlp.weights[l])
                                     : tape.constant(mlp.weights[l]));
    vars.biases.push_back(trainable ? tape.leaf(mlp.biases[l])
                                    : tape.constant(mlp.biases[l]));
  }
  return vars;
}

Var mlp_forward(const Mlp& mlp, const MlpVars& params, Var batch) {
  check_batch(mlp, batch.cols());
  if (params.weights.size() != mlp.layer_count())
    throw std::invalid_argument("mlp_forward: parameter/layer count mismatch");
  Var h = batch;
  const std::size_t last = mlp.layer_count() - 1;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    Var z = add_rowvec(matmul(h, params.weights[l]), params.biases[l]);
    if (l < last) {
      h = mlp.config.hidden_activation == Activation::Relu ? relu(z) : tanh(z);
    } else {
      switch (mlp.config.output_activation) {
        case OutputActivation::Identity: h = z; break;
        case OutputActivation::Softplus: h = softplus(z); break;
        case OutputActivation::Sigmoid: h = sigmoid(z); break;
        case OutputActivation::TanhScaled:
          h = scale(tanh(z), mlp.config.output_scale);
          break;
      }
    }
  }
  if (!h.value().allFinite())
    throw std::runtime_error("mlp_forward: non-finite output");
  return h;
}

MlpGrads read_grads(const MlpVars& params) {
  MlpGrads grads;
  for (const Var& w : params.weights) grads.weights.push_back(w.grad());
  for (const Var& b : params.biases) grads.biases.push_back(b.grad());
  return grads;
}

double grad_norm(const MlpGrads& grads) {
  double sq = 0.0;
  for (const Matrix& g : grads.weights) sq += g.squaredNorm();
  for (const Matrix& g : grads.biases) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void clip_grad_norm(MlpGrads& grads, double max_norm) {
  const double norm = grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (Matrix& g : grads.weights) g *= factor;
  for (Matrix& g : grads.biases) g *= factor;
}

AdamState adam_new(const Mlp& mlp, double learning_rate, double beta1,
                   double beta2, double epsilon) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    state.weight_m.push_back(Matrix::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
    state.weight_v.push_back(Matrix::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
    state.bias_m.push_back(Matrix::Zero(1, mlp.biases[l].cols()));
    state.bias_v.push_back(Matrix::Zero(1, mlp.biases[l].cols()));
  }
  return state;
}

namespace {

void adam_update_one(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                     const AdamState& s, double direction) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  m = s.beta1 * m + (1.0 - s.beta1) * direction * grad;
  v = s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  param.array() -= s.learning_rate * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state, bool maximize) {
  if (grads.weights.size() != mlp.layer_count() ||
      grads.biases.size() != mlp.layer_count())
    throw std::invalid_argument("adam_step: gradient/layer count mismatch");
  state.step += 1;
  const double direction = maximize ? -1.0 : 1.0;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    adam_update_one(mlp.weights[l], grads.weights[l], state.weight_m[l],
                    state.weight_v[l], state, direction);
    adam_update_one(mlp.biases[l], grads.biases[l], state.bias_m[l],
                    state.bias_v[l], state, direction);
  }
}

double finite_diff_check(const Mlp& mlp, const LossBuilder& loss, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be > 0");

  Tape tape;
  MlpVars vars = mlp_params(tape, mlp, true);
  Var l = loss(tape, vars);
  tape.backward(l);
  MlpGrads analytic = read_grads(vars);

  Mlp probe = mlp;
  auto eval = [&]() {
    Tape t;
    MlpVars v = mlp_params(t, probe, false);
    return loss(t, v).scalar();
  };
  auto probe_matrix = [&](Matrix& p, const Matrix& a) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double saved = p(i, j);
        p(i, j) = saved + step;
        const double up = eval();
        p(i, j) = saved - step;
        const double down = eval();
        p(i, j) = saved;
        const double numeric = (up - down) / (2.0 * step);
        // Floor the denominator: components this small are dominated by
        // cancellation noise in the central difference, so a relative
        // comparison against them is meaningless.
        const double scale =
            std::max({std::abs(a(i, j)), std::abs(numeric), 1e-4});
        const double err = std::abs(a(i, j) - numeric) / scale;
        if (err > worst) worst = err;
      }
    }
    return worst;
  };

  double worst = 0.0;
  for (std::size_t l2 = 0; l2 < probe.layer_count(); ++l2) {
    worst = std::max(worst, probe_matrix(probe.weights[l2], analytic.weights[l2]));
    worst = std::max(worst, probe_matrix(probe.biases[l2], analytic.biases[l2]));
  }
  return worst;
}

bool relu_kink_margin(const Mlp& mlp, const Matrix& batch, double margin) {
  if (!(margin > 0.0))
    throw std::invalid_argument("relu_kink_margin: margin must be > 0");
  if (batch.cols() != mlp.config.input_dim)
    throw std::invalid_argument("relu_kink_margin: batch width mismatch");
  if (mlp.config.hidden_activation != Activation::Relu) return true;
  Matrix h = batch;
  const std::size_t last = mlp.layer_count() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    Matrix z = h * mlp.weights[l];
    z.rowwise() += mlp.biases[l].row(0);
    if (z.array().abs().minCoeff() < margin) return false;
    h = z.cwiseMax(0.0);
  }
  return true;
}

double randomized_gradient_check(std::uint64_t seed, int count) {
  if (count < 1)
    throw std::invalid_argument("randomized_gradient_check: count must be >= 1");
  Rng rng(seed);
  const double step = 1e-4;
  double worst = 0.0;
  for (int t = 0; t < count; ++t) {
    MlpConfig cfg;
    cfg.input_dim = 1 + static_cast<int>(rng.next_u64() % 4);
    cfg.output_dim = 1 + static_cast<int>(rng.next_u64() % 3);
    const int depth = 1 + static_cast<int>(rng.next_u64() % 3);
    for (int l = 0; l < depth; ++l)
      cfg.hidden_layers.push_back(4 + static_cast<int>(rng.next_u64() % 12));
    cfg.hidden_activation = t % 2 == 0 ? Activation::Relu : Activation::Tanh;
    const OutputActivation heads[] = {
        OutputActivation::Identity, OutputActivation::Softplus,
        OutputActivation::Sigmoid, OutputActivation::TanhScaled};
    cfg.output_activation = heads[t % 4];
    cfg.output_scale = 2.0;

    Mlp mlp = mlp_new(cfg, rng.next_u64());
    // Zero-init biases can leave a unit with tiny fan-in weights pinned to
    // its kink for every input; push hidden biases off zero.
    for (std::size_t l = 0; l + 1 < mlp.layer_count(); ++l)
      for (Eigen::Index j = 0; j < mlp.biases[l].cols(); ++j)
        mlp.biases[l](0, j) = rng.normal() >= 0.0 ? 0.2 : -0.2;
    // Central differences are only trustworthy away from relu kinks;
    // redraw the batch until every pre-activation clears 50x the step.
    Matrix batch = rng.normal_matrix(6, cfg.input_dim);
    for (int tries = 0;
         tries < 500 && !relu_kink_margin(mlp, batch, 50.0 * step); ++tries)
      batch = rng.normal_matrix(6, cfg.input_dim);

    auto loss = [&batch, &mlp](Tape& tape, const MlpVars& params) {
      return mean_all(square(mlp_forward(mlp, params, tape.constant(batch))));
    };
    worst = std::max(worst, finite_diff_check(mlp, loss, step));
  }
  return worst;
}

}  // namespace cortical
