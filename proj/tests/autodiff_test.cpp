#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "cortical/autodiff.hpp"
#include "cortical/rng.hpp"

using namespace cortical;

namespace {

// Central-difference gradient of a scalar graph w.r.t. a single leaf.
double grad_check(const std::function<Var(Tape&, Var)>& fn, const Matrix& x0,
                  double step = 1e-6) {
  Matrix analytic;
  {
    Tape tape;
    Var x = tape.leaf(x0);
    Var loss = fn(tape, x);
    tape.backward(loss);
    analytic = x.grad();
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
      auto eval = [&](double delta) {
        Matrix xp = x0;
        xp(i, j) += delta;
        Tape tape;
        Var x = tape.leaf(xp);
        return fn(tape, x).scalar();
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      const double err = std::abs(analytic(i, j) - numeric) /
                         (std::abs(numeric) + 1e-12);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("forward values match eigen expressions") {
  Tape tape;
  Matrix a(2, 3), b(3, 2);
  a << 1, 2, 3, 4, 5, 6;
  b << 1, 0, 0, 1, 2, -1;
  Var va = tape.leaf(a), vb = tape.leaf(b);
  CHECK(matmul(va, vb).value().isApprox(a * b));
  CHECK(relu(va).value().isApprox(a.cwiseMax(0.0)));
  CHECK(square(va).value().isApprox(a.cwiseProduct(a)));
  CHECK(scale(va, -2.0).value().isApprox(-2.0 * a));
  CHECK(add_scalar(va, 3.0).value().isApprox((a.array() + 3.0).matrix()));
  CHECK(sum_all(va).scalar() == doctest::Approx(21.0));
  CHECK(mean_all(va).scalar() == doctest::Approx(3.5));
  Matrix rn = row_sqnorm(va).value();
  CHECK(rn(0, 0) == doctest::Approx(14.0));
  CHECK(rn(1, 0) == doctest::Approx(77.0));
}

TEST_CASE("scalar-only backward is enforced") {
  Tape tape;
  Matrix a = Matrix::Ones(2, 2);
  Var v = tape.leaf(a);
  CHECK_THROWS(tape.backward(v));  // 2x2, not a scalar
}

TEST_CASE("gradient of sum of squares is 2w") {
  Tape tape;
  Matrix w(2, 2);
  w << 1, -2, 3, 0.5;
  Var vw = tape.leaf(w);
  tape.backward(sum_all(square(vw)));
  CHECK(vw.grad().isApprox(2.0 * w));
}

TEST_CASE("untouched leaves get zero gradients") {
  Tape tape;
  Var used = tape.leaf(Matrix::Ones(1, 1));
  Var unused = tape.leaf(Matrix::Ones(2, 2));
  tape.backward(sum_all(square(used)));
  CHECK(unused.grad().isZero());
}

TEST_CASE("reused nodes accumulate gradient") {
  // f = sum(x*x') with x used twice via add: f = sum((x+x)^2) = 4 sum(x^2)
  Tape tape;
  Matrix x0(1, 3);
  x0 << 1, 2, 3;
  Var x = tape.leaf(x0);
  tape.backward(sum_all(square(add(x, x))));
  CHECK(x.grad().isApprox(8.0 * x0));
}

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(17);
  const Matrix x0 = rng.normal_matrix(3, 4);
  const Matrix pos = x0.array().abs() + 0.5;

  auto check = [](const std::function<Var(Tape&, Var)>& fn, const Matrix& at) {
    CHECK(grad_check(fn, at) < 1e-5);
  };
  check([](Tape&, Var x) { return sum_all(tanh(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(sigmoid(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(softplus(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(log_softplus(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(log_sigmoid(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(square(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(log(x)); }, pos);
  check([](Tape&, Var x) { return sum_all(reciprocal(x)); }, pos);
  check([](Tape&, Var x) { return mean_all(square(x)); }, x0);
  check([](Tape&, Var x) { return sum_all(square(relu(x))); }, x0);
  check([](Tape&, Var x) { return sum_all(square(hinge(x))); }, x0);
  check([](Tape&, Var x) { return sum_all(square(clamp_min(x, 0.1))); }, pos);
  check([](Tape&, Var x) { return sum_all(square(row_sqnorm(x))); }, x0);
}

TEST_CASE("fused log-head ops stay exact where the head underflows") {
  Matrix z(1, 4);
  z << -800.0, -37.5, 0.0, 50.0;

  Tape tape;
  Var v = tape.leaf(z);
  const Matrix lsp = log_softplus(v).value();
  CHECK(lsp(0, 0) == doctest::Approx(-800.0));  // log softplus(z) -> z far left
  CHECK(lsp(0, 1) == doctest::Approx(-37.5));
  CHECK(lsp(0, 2) == doctest::Approx(std::log(std::log(2.0))));
  CHECK(lsp(0, 3) == doctest::Approx(std::log(50.0)));
  tape.backward(sum_all(log_softplus(v)));
  CHECK(v.grad()(0, 0) == doctest::Approx(1.0));  // restoring slope survives
  CHECK(v.grad()(0, 3) == doctest::Approx(1.0 / 50.0));

  Tape tape2;
  Var w = tape2.leaf(z);
  const Matrix lsg = log_sigmoid(w).value();
  CHECK(lsg(0, 0) == doctest::Approx(-800.0));
  CHECK(lsg(0, 2) == doctest::Approx(std::log(0.5)));
  CHECK(lsg(0, 3) == doctest::Approx(0.0));
  tape2.backward(sum_all(log_sigmoid(w)));
  CHECK(w.grad()(0, 0) == doctest::Approx(1.0));
  CHECK(w.grad()(0, 2) == doctest::Approx(0.5));
}

TEST_CASE("structural op gradients match finite differences") {
  Rng rng(23);
  const Matrix x0 = rng.normal_matrix(4, 3);
  const Matrix w = rng.normal_matrix(3, 2);
  const Eigen::RowVectorXd bias = Eigen::RowVectorXd::Constant(3, 0.7);
  const Eigen::RowVectorXd factors = Eigen::RowVectorXd::LinSpaced(3, 0.5, 2.0);
  const std::vector<int> perm{2, 3, 0, 1};

  CHECK(grad_check([&](Tape& t, Var x) {
          Var vw = t.constant(w);
          return sum_all(square(matmul(x, vw)));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape& t, Var x) {
          Var vb = t.constant(Matrix(bias));
          return sum_all(square(add_rowvec(x, vb)));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape& t, Var x) {
          return sum_all(square(sub(x, t.constant(Matrix::Ones(4, 3)))));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape&, Var x) {
          return sum_all(square(cmul(x, Matrix::Constant(4, 3, 1.5))));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape&, Var x) {
          return sum_all(square(scale_cols(x, factors)));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape&, Var x) {
          return sum_all(square(permute_rows(x, perm)));
        }, x0) < 1e-5);
  CHECK(grad_check([&](Tape& t, Var x) {
          Var other = t.constant(Matrix::Ones(4, 2));
          return sum_all(square(hstack(x, other)));
        }, x0) < 1e-5);
  // bias as the differentiated input of add_rowvec
  CHECK(grad_check([&](Tape& t, Var b) {
          Var base = t.constant(x0);
          return sum_all(square(add_rowvec(base, b)));
        }, Matrix(bias)) < 1e-5);
}

TEST_CASE("matmul gradient in the weight argument") {
  Rng rng(31);
  const Matrix a = rng.normal_matrix(5, 3);
  CHECK(grad_check([&](Tape& t, Var w) {
          Var va = t.constant(a);
          return sum_all(square(matmul(va, w)));
        }, rng.normal_matrix(3, 2)) < 1e-5);
}

TEST_CASE("project_ball forward caps row norms") {
  Tape tape;
  Matrix x(2, 2);
  x << 3, 4, 0.3, 0.4;
  Var v = project_ball(tape.leaf(x), 1.0);
  CHECK(v.value().row(0).norm() == doctest::Approx(1.0));
  CHECK(v.value()(0, 0) == doctest::Approx(0.6));
  CHECK(v.value()(0, 1) == doctest::Approx(0.8));
  CHECK(v.value().row(1).isApprox(x.row(1)));  // inside: untouched
}

TEST_CASE("project_ball gradient away from the boundary") {
  Matrix inside(1, 2), outside(2, 2);
  inside << 0.3, -0.2;
  outside << 2.0, -1.0, -0.5, 3.0;
  Matrix w_in(1, 2), w_out(2, 2);
  w_in << 1.3, -0.4;
  w_out << 1.3, -0.4, 0.9, 2.1;
  auto weighted = [](const Matrix& w) {
    return [w](Tape&, Var x) { return sum_all(cmul(project_ball(x, 1.0), w)); };
  };
  CHECK(grad_check(weighted(w_in), inside) < 1e-5);
  CHECK(grad_check(weighted(w_out), outside) < 1e-5);
}

TEST_CASE("composite expression gradient") {
  // mean(softplus(x W + b)) exercised end to end on one leaf at a time.
  Rng rng(41);
  const Matrix x = rng.normal_matrix(6, 3);
  const Matrix w = rng.normal_matrix(3, 4);
  const Matrix b = rng.normal_matrix(1, 4);
  CHECK(grad_check([&](Tape& t, Var leaf) {
          Var out = mean_all(softplus(add_rowvec(matmul(leaf, t.constant(w)),
                                                 t.constant(b))));
          return out;
        }, x) < 1e-5);
  CHECK(grad_check([&](Tape& t, Var leaf) {
          return mean_all(softplus(add_rowvec(matmul(t.constant(x), leaf),
                                              t.constant(b))));
        }, w) < 1e-5);
  CHECK(grad_check([&](Tape& t, Var leaf) {
          return mean_all(softplus(add_rowvec(matmul(t.constant(x),
                                                     t.constant(w)), leaf)));
        }, b) < 1e-5);
}

}  // TEST_SUITE
