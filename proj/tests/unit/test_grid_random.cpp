#include <doctest.h>

#include <cmath>
#include <random>

#include "condkl/error.hpp"
#include "condkl/grid.hpp"
#include "condkl/random.hpp"

using namespace condkl;

TEST_CASE("grid weights and node ordering") {
  StructuredGrid g(2.0, 1.0, 8, 4);
  CHECK(g.size() == 32);
  CHECK(g.weights().sum() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK((g.weights().array() > 0).all());
  const Point p = g.node(g.index(3, 2));
  CHECK(p.x1 == doctest::Approx(3.5 * 0.25));
  CHECK(p.x2 == doctest::Approx(2.5 * 0.25));
  // x1 varies fastest
  CHECK(g.node(1).x1 > g.node(0).x1);
  CHECK(g.node(1).x2 == g.node(0).x2);
  CHECK(g.find_node(p) == g.index(3, 2));
  CHECK(g.find_node({0.01, 0.01}) == -1);
  CHECK_THROWS_AS(StructuredGrid(2.0, 1.0, 1, 4), InvalidArgument);
}

TEST_CASE("bilinear interpolation reproduces bilinear functions, including the boundary band") {
  StructuredGrid g(2.0, 1.0, 10, 6);
  auto f = [](double x, double y) { return 0.3 + 1.7 * x - 0.4 * y + 0.9 * x * y; };
  Vector field(g.size());
  for (Index i = 0; i < g.size(); ++i) field[i] = f(g.node(i).x1, g.node(i).x2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0.0, 2.0), uy(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Point p{ux(rng), uy(rng)};
    CHECK(g.interpolate(field, p) == doctest::Approx(f(p.x1, p.x2)).epsilon(1e-12));
  }
  for (Point p : {Point{0.0, 0.0}, Point{2.0, 1.0}, Point{0.0, 1.0}}) CHECK(g.interpolate(field, p) == doctest::Approx(f(p.x1, p.x2)));
  // At a node the stencil is the identity.
  const Stencil st = g.stencil(g.node(17));
  CHECK(st.apply(field) == doctest::Approx(field[17]).epsilon(1e-14));
}

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal streams are reproducible, distinct and standard normal") {
  NormalStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  Vector va(1000), vb(1000), vc(1000), vd(1000);
  a.fill(va);
  b.fill(vb);
  c.fill(vc);
  d.fill(vd);
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);

  NormalStream s(1, 0);
  const int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));

  NormalStream u(9, 3);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    CHECK_UNARY(x > 0.0);
    CHECK_UNARY(x < 1.0);
  }
}

TEST_CASE("derived seeds separate labels") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}
