#include "cortical/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace cortical {

namespace {

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || b.tape() == nullptr)
    throw std::invalid_argument("autodiff: operand has no tape");
  if (a.tape() != b.tape())
    throw std::invalid_argument("autodiff: operands live on different tapes");
}

void check_valid(const Var& v) {
  if (v.tape() == nullptr) throw std::invalid_argument("autodiff: invalid Var");
}

[[noreturn]] void shape_error(const std::string& op, const Var& a, const Var& b) {
  throw std::invalid_argument(
      op + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
      std::to_string(b.cols()) + ")");
}

}  // namespace

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw std::invalid_argument("Var::value: invalid Var");
  return tape_->node(id_).value;
}

const Matrix& Var::grad() const {
  if (tape_ == nullptr) throw std::invalid_argument("Var::grad: invalid Var");
  return tape_->grad_ref(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("Var::scalar: node is not 1x1");
  return v(0, 0);
}

Var Tape::emplace(Matrix value, bool requires_grad,
                  std::function<void(Tape&, const Node&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return emplace(std::move(value), false, nullptr); }

Var Tape::leaf(const Matrix& value) { return emplace(value, true, nullptr); }

Matrix& Tape::grad_ref(int id) {
  Node& n = node(id);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  check_valid(loss);
  if (loss.tape() != this)
    throw std::invalid_argument("Tape::backward: loss from a different tape");
  const Node& l = node(loss.id());
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be a 1x1 scalar node");
  grad_ref(loss.id())(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, n);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Tape& t = *a.tape();
  bool rg = t.tracks(a.id()) || t.tracks(b.id());
  Matrix v = a.value() * b.value();
  int ia = a.id(), ib = b.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ia, ib](Tape& tp, const Tape::Node& n) {
            if (tp.tracks(ia))
              tp.grad_ref(ia).noalias() += n.grad * tp.node(ib).value.transpose();
            if (tp.tracks(ib))
              tp.grad_ref(ib).noalias() += tp.node(ia).value.transpose() * n.grad;
          }));
}

Var add_rowvec(Var x, Var bias) {
  check_same_tape(x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_error("add_rowvec", x, bias);
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id()) || t.tracks(bias.id());
  Matrix v = x.value().rowwise() + bias.value().row(0);
  int ix = x.id(), ib = bias.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, ib](Tape& tp, const Tape::Node& n) {
            if (tp.tracks(ix)) tp.grad_ref(ix) += n.grad;
            if (tp.tracks(ib)) tp.grad_ref(ib) += n.grad.colwise().sum();
          }));
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  Tape& t = *a.tape();
  bool rg = t.tracks(a.id()) || t.tracks(b.id());
  Matrix v = a.value() + b.value();
  int ia = a.id(), ib = b.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ia, ib](Tape& tp, const Tape::Node& n) {
            if (tp.tracks(ia)) tp.grad_ref(ia) += n.grad;
            if (tp.tracks(ib)) tp.grad_ref(ib) += n.grad;
          }));
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
  Tape& t = *a.tape();
  bool rg = t.tracks(a.id()) || t.tracks(b.id());
  Matrix v = a.value() - b.value();
  int ia = a.id(), ib = b.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ia, ib](Tape& tp, const Tape::Node& n) {
            if (tp.tracks(ia)) tp.grad_ref(ia) += n.grad;
            if (tp.tracks(ib)) tp.grad_ref(ib) -= n.grad;
          }));
}

namespace {

// Shared scaffolding for elementwise unary ops: value map + grad weight map.
template <typename FwdFn, typename GradFn>
Var unary_op(Var x, FwdFn fwd, GradFn dweight) {
  check_valid(x);
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v = x.value().unaryExpr(fwd);
  int ix = x.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, dweight](Tape& tp, const Tape::Node& n) {
            const Matrix& xv = tp.node(ix).value;
            tp.grad_ref(ix).array() +=
                n.grad.array() * xv.unaryExpr(dweight).array();
          }));
}

}  // namespace

Var scale(Var x, double c) {
  return unary_op(x, [c](double v) { return c * v; }, [c](double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary_op(x, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

Var relu(Var x) {
  return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary_op(x, [](double v) { return std::tanh(v); },
                  [](double v) { double y = std::tanh(v); return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  auto sig = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                            : std::exp(v) / (1.0 + std::exp(v)); };
  return unary_op(x, sig, [sig](double v) { double y = sig(v); return y * (1.0 - y); });
}

Var softplus(Var x) {
  auto sig = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                            : std::exp(v) / (1.0 + std::exp(v)); };
  return unary_op(x,
                  [](double v) {
                    return v > 0.0 ? v + std::log1p(std::exp(-v))
                                   : std::log1p(std::exp(v));
                  },
                  sig);
}

Var log_softplus(Var x) {
  // Below -37 softplus(v) equals exp(v) to double precision, so the log is v
  // itself and the slope is 1; elsewhere the direct composition is safe.
  auto fwd = [](double v) {
    if (v < -37.0) return v;
    return std::log(v > 0.0 ? v + std::log1p(std::exp(-v))
                            : std::log1p(std::exp(v)));
  };
  auto grad = [](double v) {
    if (v < -37.0) return 1.0;
    const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                : std::exp(v) / (1.0 + std::exp(v));
    const double sp = v > 0.0 ? v + std::log1p(std::exp(-v))
                              : std::log1p(std::exp(v));
    return sig / sp;
  };
  return unary_op(x, fwd, grad);
}

Var log_sigmoid(Var x) {
  // log(sigmoid(v)) = -softplus(-v), slope 1 - sigmoid(v).
  auto fwd = [](double v) {
    return v > 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
  };
  auto grad = [](double v) {
    return v >= 0.0 ? std::exp(-v) / (1.0 + std::exp(-v))
                    : 1.0 / (1.0 + std::exp(v));
  };
  return unary_op(x, fwd, grad);
}

Var log(Var x) {
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double v) { return 1.0 / v; });
}

Var square(Var x) {
  return unary_op(x, [](double v) { return v * v; },
                  [](double v) { return 2.0 * v; });
}

Var reciprocal(Var x) {
  return unary_op(x, [](double v) { return 1.0 / v; },
                  [](double v) { return -1.0 / (v * v); });
}

Var clamp_min(Var x, double lo) {
  return unary_op(x, [lo](double v) { return v > lo ? v : lo; },
                  [lo](double v) { return v > lo ? 1.0 : 0.0; });
}

Var hinge(Var x) { return clamp_min(x, 0.0); }

Var cmul(Var x, const Matrix& weights) {
  check_valid(x);
  if (weights.rows() != x.rows() || weights.cols() != x.cols())
    throw std::invalid_argument("cmul: weight shape mismatch");
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v = x.value().cwiseProduct(weights);
  int ix = x.id();
  Matrix w = weights;
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, w](Tape& tp, const Tape::Node& n) {
            tp.grad_ref(ix) += n.grad.cwiseProduct(w);
          }));
}

Var scale_cols(Var x, const Eigen::RowVectorXd& factors) {
  check_valid(x);
  if (factors.cols() != x.cols())
    throw std::invalid_argument("scale_cols: factor count mismatch");
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v = x.value().array().rowwise() * factors.array();
  int ix = x.id();
  Eigen::RowVectorXd f = factors;
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, f](Tape& tp, const Tape::Node& n) {
            tp.grad_ref(ix).array() += n.grad.array().rowwise() * f.array();
          }));
}

Var hstack(Var a, Var b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows()) shape_error("hstack", a, b);
  Tape& t = *a.tape();
  bool rg = t.tracks(a.id()) || t.tracks(b.id());
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  int ia = a.id(), ib = b.id();
  Eigen::Index ca = a.cols(), cb = b.cols();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ia, ib, ca, cb](Tape& tp, const Tape::Node& n) {
            if (tp.tracks(ia)) tp.grad_ref(ia) += n.grad.leftCols(ca);
            if (tp.tracks(ib)) tp.grad_ref(ib) += n.grad.rightCols(cb);
          }));
}

Var permute_rows(Var x, const std::vector<int>& perm) {
  check_valid(x);
  if (static_cast<Eigen::Index>(perm.size()) != x.rows())
    throw std::invalid_argument("permute_rows: permutation length mismatch");
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    v.row(i) = x.value().row(perm[static_cast<std::size_t>(i)]);
  int ix = x.id();
  std::vector<int> p = perm;
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, p](Tape& tp, const Tape::Node& n) {
            Matrix& g = tp.grad_ref(ix);
            for (Eigen::Index i = 0; i < n.grad.rows(); ++i)
              g.row(p[static_cast<std::size_t>(i)]) += n.grad.row(i);
          }));
}

Var row_sqnorm(Var x) {
  check_valid(x);
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v = x.value().rowwise().squaredNorm();
  int ix = x.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix](Tape& tp, const Tape::Node& n) {
            const Matrix& xv = tp.node(ix).value;
            const Eigen::ArrayXd g = n.grad.col(0);
            tp.grad_ref(ix).array() += (xv.array().colwise() * g) * 2.0;
          }));
}

Var mean_all(Var x) {
  check_valid(x);
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v(1, 1);
  v(0, 0) = x.value().mean();
  int ix = x.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix](Tape& tp, const Tape::Node& n) {
            const Matrix& xv = tp.node(ix).value;
            tp.grad_ref(ix).array() +=
                n.grad(0, 0) / static_cast<double>(xv.size());
          }));
}

Var sum_all(Var x) {
  check_valid(x);
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  Matrix v(1, 1);
  v(0, 0) = x.value().sum();
  int ix = x.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix](Tape& tp, const Tape::Node& n) {
            tp.grad_ref(ix).array() += n.grad(0, 0);
          }));
}

Var project_ball(Var x, double radius) {
  check_valid(x);
  if (!(radius > 0.0)) throw std::invalid_argument("project_ball: radius must be > 0");
  Tape& t = *x.tape();
  bool rg = t.tracks(x.id());
  const Matrix& xv = x.value();
  Matrix v = xv;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double r = xv.row(i).norm();
    if (r > radius) v.row(i) *= radius / r;
  }
  int ix = x.id();
  return t.emplace(std::move(v), rg, !rg ? nullptr :
      std::function<void(Tape&, const Tape::Node&)>(
          [ix, radius](Tape& tp, const Tape::Node& n) {
            const Matrix& xv = tp.node(ix).value;
            Matrix& g = tp.grad_ref(ix);
            for (Eigen::Index i = 0; i < xv.rows(); ++i) {
              double r = xv.row(i).norm();
              if (r <= radius) {
                g.row(i) += n.grad.row(i);
              } else {
                // Jacobian of A*x/||x||: (A/r) * (I - x x^T / r^2)
                double dot = xv.row(i).dot(n.grad.row(i));
                g.row(i) += (radius / r) *
                            (n.grad.row(i) - xv.row(i) * (dot / (r * r)));
              }
            }
          }));
}

}  // namespace cortical
