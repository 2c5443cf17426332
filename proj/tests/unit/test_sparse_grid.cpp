#include <doctest.h>

#include <cmath>

#include "condkl/error.hpp"
#include "condkl/sparse_grid.hpp"

using namespace condkl;

namespace {

double normal_moment(int j) {
  if (j % 2 == 1) return 0.0;
  double m = 1.0;
  for (int k = j - 1; k > 0; k -= 2) m *= k;
  return m;
}

}  // namespace

TEST_CASE("gauss-hermite moments") {
  for (int n = 1; n <= 12; ++n) {
    const QuadratureRule q = gauss_hermite(n);
    REQUIRE(q.nodes.size() == n);
    CHECK(q.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 1; i < n; ++i) CHECK(q.nodes[i] > q.nodes[i - 1]);
    for (int j = 0; j <= 2 * n - 1; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += q.weights[i] * std::pow(q.nodes[i], j);
      CAPTURE(n);
      CAPTURE(j);
      CHECK(std::abs(s - normal_moment(j)) <= 1e-12 * normal_moment(j + j % 2) * std::pow(2.0 * n, 0.5 * j));
    }
  }
  const QuadratureRule q3 = gauss_hermite(3);
  CHECK(q3.nodes[0] == doctest::Approx(-std::sqrt(3.0)));
  CHECK(q3.nodes[1] == 0.0);
  CHECK(q3.weights[1] == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(gauss_hermite(0), InvalidArgument);
}

TEST_CASE("smolyak node counts in 20 dimensions") {
  const Index expected[] = {41, 841, 11561};
  for (int level = 2; level <= 4; ++level) {
    const SparseGridRule rule = smolyak_grid(20, level);
    CHECK(rule.size() == expected[level - 2]);
    CHECK(rule.nodes.cols() == 20);
    CHECK(std::abs(rule.weights.sum() - 1.0) < 1e-10 * rule.weights.cwiseAbs().sum());
  }
  CHECK(smolyak_grid(20, 1).size() == 1);
}

TEST_CASE("smolyak rule integrates low total degree exactly") {
  const SparseGridRule rule = smolyak_grid(2, 3);
  for (int a = 0; a <= 5; ++a) {
    for (int b = 0; a + b <= 5; ++b) {
      double s = 0.0;
      for (Index i = 0; i < rule.size(); ++i)
        s += rule.weights[i] * std::pow(rule.nodes(i, 0), a) * std::pow(rule.nodes(i, 1), b);
      CAPTURE(a);
      CAPTURE(b);
      CHECK(std::abs(s - normal_moment(a) * normal_moment(b)) < 1e-12);
    }
  }
  const SparseGridRule big = smolyak_grid(6, 2);
  for (int a = 0; a < 6; ++a) {
    for (int b = a; b < 6; ++b) {
      double s = 0.0;
      for (Index i = 0; i < big.size(); ++i) s += big.weights[i] * big.nodes(i, a) * big.nodes(i, b);
      CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("one-dimensional smolyak is plain gauss-hermite") {
  const SparseGridRule rule = smolyak_grid(1, 5);
  const QuadratureRule q = gauss_hermite(5);
  REQUIRE(rule.size() == 5);
  for (Index i = 0; i < 5; ++i) {
    CHECK(rule.nodes(i, 0) == doctest::Approx(q.nodes[i]));
    CHECK(rule.weights[i] == doctest::Approx(q.weights[i]));
  }
}
