#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "condkl/active_learning.hpp"
#include "condkl/error.hpp"
#include "condkl/kl_expansion.hpp"
#include "condkl/random.hpp"

using namespace condkl;

namespace {

KernelHyperparams theta_small() {
  KernelHyperparams t;
  t.sigma = 0.8;
  t.l1 = 0.5;
  t.l2 = 0.3;
  t.convention = LengthScaleConvention::kRbf;
  return t;
}

double se(const Point& a, const Point& b, const KernelHyperparams& t) {
  const double d1 = (a.x1 - b.x1) / t.l1, d2 = (a.x2 - b.x2) / t.l2;
  return t.variance() * std::exp(-0.5 * (d1 * d1 + d2 * d2));
}

// sigma^2 - k^T (K + s^2 I)^-1 k by Gaussian elimination with partial pivoting
double posterior_variance(const ObservationSet& obs, const KernelHyperparams& t, const Point& x) {
  const std::size_t n = obs.locations().size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = se(obs.locations()[i], obs.locations()[j], t) + (i == j ? t.sigma_eps * t.sigma_eps : 0.0);
    a[i][n] = se(obs.locations()[i], x, t);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> sol(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = a[i][n];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * sol[k];
    sol[i] = s / a[i][i];
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q += se(obs.locations()[i], x, t) * sol[i];
  return t.variance() - q;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

}  // namespace

TEST_CASE("method parsing") {
  CHECK(parse_method("method-1") == AcquisitionMethod::kMethod1);
  CHECK(parse_method("method-2") == AcquisitionMethod::kMethod2);
  CHECK_FALSE(parse_method("method-3").has_value());
  CHECK(to_string(AcquisitionMethod::kMethod2) == "method-2");
}

TEST_CASE("method 1 picks the largest posterior variance") {
  const KernelHyperparams t = theta_small();
  const ObservationSet obs({{0.2, 0.2}, {1.0, 0.5}, {1.7, 0.8}}, Vector::Zero(3));
  const StructuredGrid grid(2.0, 1.0, 16, 8);
  const PointList cands = default_candidates(grid, obs);
  const AcquisitionResult r = acquire_method1(obs, t, cands);
  Index best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double v = posterior_variance(obs, t, cands[i]);
    CHECK(r.criterion[static_cast<Index>(i)] == doctest::Approx(v).epsilon(1e-9));
    if (v > best_v + 1e-12) {
      best_v = v;
      best = static_cast<Index>(i);
    }
  }
  CHECK(r.candidate == best);

  SUBCASE("a single candidate is returned as is") {
    const AcquisitionResult one = acquire_method1(obs, t, {{0.9, 0.1}});
    CHECK(one.candidate == 0);
    CHECK(one.location.x1 == 0.9);
  }
  SUBCASE("a near-duplicate of an observation is never chosen") {
    const AcquisitionResult two = acquire_method1(obs, t, {{1.0 + 1e-9, 0.5}, {0.3, 0.9}});
    CHECK(two.candidate == 1);
  }
  SUBCASE("ties go to the first candidate") {
    const ObservationSet mid({{1.0, 0.5}}, Vector::Zero(1));
    const AcquisitionResult tie = acquire_method1(mid, t, {{0.5, 0.5}, {1.5, 0.5}});
    CHECK(tie.candidate == 0);
  }
  CHECK_THROWS_AS(acquire_method1(obs, t, {{1.0, 0.5}}), InvalidArgument);
  CHECK_THROWS_AS(acquire_method1(obs, t, {}), InvalidArgument);
}

TEST_CASE("default candidates skip observed nodes") {
  const StructuredGrid grid(2.0, 1.0, 4, 2);
  const ObservationSet obs({grid.node(3), {0.33, 0.41}}, Vector::Zero(2));
  const PointList c = default_candidates(grid, obs);
  CHECK(c.size() == 7);
  for (const Point& p : c) CHECK_FALSE((p.x1 == grid.node(3).x1 && p.x2 == grid.node(3).x2));
}

TEST_CASE("sample cross-covariances match the double loop") {
  const Index nodes = 6, m = 5;
  const Matrix g = random_matrix(nodes, m, 1);
  const Matrix u = random_matrix(nodes, m, 2) + 0.5 * g;
  const CrossCovariance cc = sample_cross_covariances(g, u);
  const Matrix full = cc.expand();
  for (Index x = 0; x < nodes; ++x) {
    const double ug = u.row(x).mean();
    double vu = 0.0, vg = 0.0;
    const double gg = g.row(x).mean();
    for (Index k = 0; k < m; ++k) {
      vu += (u(x, k) - ug) * (u(x, k) - ug);
      vg += (g(x, k) - gg) * (g(x, k) - gg);
    }
    CHECK(cc.var_u[x] == doctest::Approx(vu / (m - 1)));
    CHECK(cc.var_g[x] == doctest::Approx(vg / (m - 1)));
    for (Index y = 0; y < nodes; ++y) {
      const double gy = g.row(y).mean();
      double c = 0.0;
      for (Index k = 0; k < m; ++k) c += (u(x, k) - ug) * (g(y, k) - gy);
      CHECK(full(x, y) == doctest::Approx(c / (m - 1)));
    }
  }
  for (Index y = 0; y < nodes; ++y) CHECK((cc.column(y) - full.col(y)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(sample_cross_covariances(g.leftCols(1), u.leftCols(1)), InvalidArgument);
}

TEST_CASE("method 2 objective on a hand-built ensemble") {
  const StructuredGrid grid(2.0, 1.0, 2, 2);  // cell area 0.5
  Matrix g(4, 3), u(4, 3);
  g << 1, 2, 3,  //
      0, 0, 3,   //
      1, 1, 1,   //
      -1, 0, 1;
  u << 2, 4, 6,  //
      1, 0, 2,   //
      0, 3, 0,   //
      5, 5, 5;
  const KernelHyperparams t = theta_small();
  const AcquisitionResult r = acquire_method2_from_ensemble(grid, g, u, t, grid.nodes());
  // var_u = {4, 1, 3, 0}; bound = 0.5 * 8
  CHECK(r.objective_bound == doctest::Approx(4.0));
  // node 0: var_g = 1, cov(u, g0) = {2, 0.5, 0, 0}
  CHECK(r.criterion[0] == doctest::Approx(0.5 * (0.0 + 0.75 + 3.0 + 0.0)));
  // node 1: var_g = 3, cov(u, g1) = {3, 1.5, -1.5, 0}
  CHECK(r.criterion[1] == doctest::Approx(0.5 * (1.0 + 0.25 + 2.25 + 0.0)));
  // node 2: var_g = 0 -> skipped
  CHECK(std::isnan(r.criterion[2]));
  CHECK(r.skipped == 1);
  // node 3 has the same centred samples as node 0
  CHECK(r.criterion[3] == doctest::Approx(r.criterion[0]));
  CHECK(r.candidate == 1);
  for (Index i : {0, 1, 3}) {
    CHECK(r.criterion[i] >= 0.0);
    CHECK(r.criterion[i] <= r.objective_bound);
  }
}

TEST_CASE("method 2 with uncorrelated output picks the first candidate") {
  const StructuredGrid grid(2.0, 1.0, 4, 2);
  const Matrix g = random_matrix(8, 10, 4);
  const Matrix u = Vector::LinSpaced(8, 0.0, 1.0).replicate(1, 10);
  const AcquisitionResult r = acquire_method2_from_ensemble(grid, g, u, theta_small(), grid.nodes());
  CHECK(r.candidate == 0);
  CHECK(r.criterion.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("method 2 objective stays within its bound") {
  const StructuredGrid grid(2.0, 1.0, 10, 5);
  const Matrix g = random_matrix(50, 40, 5);
  const Matrix u = (random_matrix(50, 40, 6) + 2.0 * g).array().tanh().matrix();
  const AcquisitionResult r = acquire_method2_from_ensemble(grid, g, u, theta_small(), grid.nodes());
  CHECK(r.criterion.minCoeff() >= 0.0);
  CHECK(r.criterion.maxCoeff() <= r.objective_bound);
  CHECK(r.criterion[r.candidate] == r.criterion.minCoeff());
  CHECK_THROWS_AS(acquire_method2_from_ensemble(grid, g, u, theta_small(), {{0.33, 0.41}}), InvalidArgument);
}

TEST_CASE("campaigns") {
  const StructuredGrid grid(2.0, 1.0, 20, 10);
  DiffusionProblem problem;
  problem.grid = grid;
  KernelHyperparams t = theta_small();
  t.sigma = 0.65;
  const KLBasis basis = solve_separable_se_eigenproblem(grid, t, 100);
  Vector xi(100);
  NormalStream(17, 0).fill(xi);
  const Vector g_ref = evaluate_field(basis, xi);
  PointList sites;
  Vector values(6);
  for (int i = 0; i < 6; ++i) {
    const Index node = grid.index(3 * i + 1, (7 * i + 2) % 10);
    sites.push_back(grid.node(node));
    values[i] = g_ref[node];
  }
  const ObservationSet obs(sites, values);

  for (AcquisitionMethod method : {AcquisitionMethod::kMethod1, AcquisitionMethod::kMethod2}) {
    CAPTURE(to_string(method));
    CampaignOptions opt;
    opt.method = method;
    opt.n_am = 4;
    opt.mc_samples = 60;
    opt.ensemble_size = 30;
    opt.seed = 99;
    opt.threads = 2;
    const Campaign a = run_campaign(g_ref, obs, t, problem, opt);
    REQUIRE_FALSE(a.error.has_value());
    REQUIRE(a.steps.size() == 5);
    CHECK(a.bound_holds);
    std::set<std::pair<double, double>> seen;
    for (const Point& p : obs.locations()) seen.insert({p.x1, p.x2});
    for (std::size_t s = 1; s < a.steps.size(); ++s) {
      CHECK(a.steps[s].norm_g < a.steps[s - 1].norm_g);
      CHECK(seen.insert({a.steps[s].location.x1, a.steps[s].location.x2}).second);
      const Index node = grid.find_node(a.steps[s].location);
      REQUIRE(node >= 0);
      CHECK(a.steps[s].value == doctest::Approx(g_ref[node]).epsilon(1e-12));
    }
    opt.threads = 1;
    const Campaign b = run_campaign(g_ref, obs, t, problem, opt);
    for (std::size_t s = 1; s < a.steps.size(); ++s) {
      CHECK(a.steps[s].location.x1 == b.steps[s].location.x1);
      CHECK(a.steps[s].location.x2 == b.steps[s].location.x2);
      CHECK(a.steps[s].norm_u == b.steps[s].norm_u);
    }
  }
}
