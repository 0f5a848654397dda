#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cortical/rng.hpp"

using cortical::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed reproduces the draw sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different sequences") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("split streams are independent of consumed draws") {
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) (void)b.uniform();  // advance b only
  Rng as = a.split(3), bs = b.split(3);
  for (int i = 0; i < 20; ++i) CHECK(as.next_u64() == bs.next_u64());
  CHECK(a.stream_seed(3) == b.stream_seed(3));
  CHECK(a.stream_seed(3) != a.stream_seed(4));
}

TEST_CASE("uniform lies in [0,1) with mean near 1/2") {
  Rng r(11);
  double acc = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    acc += u;
  }
  CHECK(std::abs(acc / 100000 - 0.5) < 0.005);
}

TEST_CASE("normal draws have standard moments") {
  Rng r(5);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("exponential has mean 1/rate and rejects bad rate") {
  Rng r(9);
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += r.exponential(2.0);
  CHECK(std::abs(acc / n - 0.5) < 0.01);
  CHECK_THROWS(r.exponential(0.0));
  CHECK_THROWS(r.exponential(-1.0));
}

TEST_CASE("cauchy median and quartiles match the scale") {
  Rng r(13);
  const int n = 100001;
  std::vector<double> xs(n);
  for (auto& x : xs) x = r.cauchy(2.0);
  std::sort(xs.begin(), xs.end());
  CHECK(std::abs(xs[n / 2]) < 0.05);                // median 0
  CHECK(std::abs(xs[3 * n / 4] - 2.0) < 0.1);       // upper quartile +scale
  CHECK(std::abs(xs[n / 4] + 2.0) < 0.1);           // lower quartile -scale
  CHECK_THROWS(r.cauchy(0.0));
}

TEST_CASE("matrix fills are deterministic and shaped") {
  Rng a(3), b(3);
  auto ma = a.normal_matrix(4, 5);
  auto mb = b.normal_matrix(4, 5);
  CHECK(ma.rows() == 4);
  CHECK(ma.cols() == 5);
  CHECK(ma == mb);
  auto u = a.uniform_matrix(3, 2, -1.0, 1.0);
  CHECK((u.array() >= -1.0).all());
  CHECK((u.array() < 1.0).all());
}

}  // TEST_SUITE
