#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "condkl/conditioning.hpp"
#include "condkl/error.hpp"

using namespace condkl;

namespace {

const KernelHyperparams kTheta{0.65, 0.15, 0.2, 0.0, LengthScaleConvention::kRbf};

ObservationSet random_obs(int n, std::uint64_t seed, double lx = 2.0, double ly = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.02, lx - 0.02), uy(0.02, ly - 0.02), uv(-1.0, 1.0);
  PointList p;
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    p.push_back({ux(rng), uy(rng)});
    y[i] = uv(rng);
  }
  return ObservationSet(p, y);
}

ObservationSet node_obs(const StructuredGrid& g, const std::vector<Index>& nodes) {
  PointList p;
  Vector y(static_cast<Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    p.push_back(g.node(nodes[i]));
    y[static_cast<Index>(i)] = std::sin(1.0 + static_cast<double>(i));
  }
  return ObservationSet(p, y);
}

// Explicit M^d with a dense inverse; the rank counts eigenvalues above 1e-8 * max.
Index oracle_rank(const ObservationSet& obs, const KLBasis& basis) {
  const Index d = basis.dim(), ns = obs.size();
  Matrix phi(d, ns);
  for (Index k = 0; k < ns; ++k)
    for (Index i = 0; i < d; ++i)
      phi(i, k) = basis.grid.interpolate(basis.eigenfunctions.col(i), obs.locations()[static_cast<std::size_t>(k)]);
  const Matrix a = basis.eigenvalues.cwiseSqrt().asDiagonal() * phi;
  // A^T A is singular when d < N_s; the oracle only covers d >= N_s
  const Matrix ainv = (a.transpose() * a).fullPivLu().inverse();
  const Matrix m = Matrix::Identity(d, d) - a * ainv * a.transpose();
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose())).eigenvalues();
  return (ev.array() > 1e-8 * ev.maxCoeff()).count();
}

}  // namespace

TEST_CASE("reduced-basis Approach 1 agrees with the dense conditional eigensolve") {
  StructuredGrid g(2.0, 1.0, 20, 10);
  const ObservationSet obs = random_obs(12, 5);
  Approach1Options dense;
  dense.solver = ConditionalEigenSolver::kDense;
  const KLBasis a = conditional_basis(obs, kTheta, g, 30, dense);
  const KLBasis b = conditional_basis(obs, kTheta, g, 30);
  CHECK(b.total_variance == doctest::Approx(a.total_variance).epsilon(1e-10));
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 30; ++i)
    CHECK(b.eigenvalues[i] == doctest::Approx(a.eigenvalues[i]).epsilon(1e-9).scale(a.eigenvalues[0]));
  const ConditionalKLModel ma = truncate_conditional_basis(a, 30), mb = truncate_conditional_basis(b, 30);
  CHECK((implied_moment_field(ma).std - implied_moment_field(mb).std).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("Approach 1 at full rank reproduces the GP posterior") {
  StructuredGrid g(2.0, 1.0, 16, 8);
  const ObservationSet obs = node_obs(g, {3, 40, 77, 100});
  Approach1Options dense;
  dense.solver = ConditionalEigenSolver::kDense;
  const KLBasis cond = conditional_basis(obs, kTheta, g, g.size(), dense);
  Index d_full = 0;
  while (d_full < cond.dim() && cond.eigenvalues[d_full] > 0.0) ++d_full;
  const ConditionalKLModel m = truncate_conditional_basis(cond, d_full);
  const MomentField mf = implied_moment_field(m);
  GpRegression gp(obs, kTheta);
  const PointList nodes = g.nodes();
  const Vector var = gp.variance(nodes);
  CHECK((mf.std.cwiseAbs2() - var).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((mf.mean - gp.mean(nodes)).cwiseAbs().maxCoeff() < 1e-10);
  for (Index node : {3, 40, 77, 100}) CHECK(mf.std[node] * mf.std[node] <= 1e-8 * 0.4225);
  CHECK(m.provenance == Provenance::kApproach1);
  CHECK((mf.std.cwiseAbs2().array() <= 0.4225 + 1e-8).all());
  CHECK(cond.total_variance <= solve_separable_se_eigenproblem(g, kTheta, 1).total_variance);
}

TEST_CASE("huge observation noise leaves the prior untouched") {
  StructuredGrid g(2.0, 1.0, 16, 8);
  KernelHyperparams t = kTheta;
  t.sigma_eps = 1e6 * t.sigma;
  const ObservationSet obs = random_obs(6, 8);
  const ConditionalKLModel m = condition_then_truncate(obs, t, g, g.size());
  const MomentField mf = implied_moment_field(m);
  CHECK(mf.mean.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(((mf.std.cwiseAbs2().array() / 0.4225 - 1.0).abs() < 1e-3).all());
}

TEST_CASE("rank law of M^d") {
  StructuredGrid g(2.0, 1.0, 40, 20);
  const KLBasis head = solve_separable_se_eigenproblem(g, kTheta, 60);
  struct Case {
    Index d;
    int ns;
  };
  for (Case c : {Case{3, 1}, Case{6, 2}, Case{12, 5}, Case{20, 8}, Case{60, 40}}) {
    CAPTURE(c.d);
    const ObservationSet obs = random_obs(c.ns, 100 + static_cast<std::uint64_t>(c.d));
    const KLBasis b = head.truncated(c.d);
    const ConditionedVariables cv = condition_xi(obs, kTheta, b);
    CHECK(cv.rank == c.d - c.ns);
    CHECK(oracle_rank(obs, b) == c.d - c.ns);
    CHECK((cv.m - cv.m.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(cv.m_eigenvalues.minCoeff() >= -1e-10);
    CHECK(cv.m_eigenvalues.maxCoeff() <= 1.0 + 1e-10);
  }
}

TEST_CASE("conditioned coefficients against an explicit formula") {
  StructuredGrid g(2.0, 1.0, 24, 12);
  KernelHyperparams t = kTheta;
  t.sigma_eps = 0.05;
  const KLBasis b = solve_separable_se_eigenproblem(g, t, 15);
  const ObservationSet obs = random_obs(9, 17);
  const ConditionedVariables cv = condition_xi(obs, t, b);
  Matrix phi(15, 9);
  for (Index k = 0; k < 9; ++k)
    for (Index i = 0; i < 15; ++i)
      phi(i, k) = g.interpolate(b.eigenfunctions.col(i), obs.locations()[static_cast<std::size_t>(k)]);
  const Matrix a = b.eigenvalues.cwiseSqrt().asDiagonal() * phi;
  Matrix cs = a.transpose() * a;
  cs.diagonal().array() += t.sigma_eps * t.sigma_eps;
  const Matrix inv = cs.fullPivLu().inverse();
  CHECK((cv.mu - a * inv * obs.values()).norm() < 1e-10);
  CHECK((cv.m - (Matrix::Identity(15, 15) - a * inv * a.transpose())).norm() < 1e-10);
  CHECK(cv.rank == 15);  // noise makes M^d full rank

  const ConditionedVariables zero = condition_xi(ObservationSet(obs.locations(), Vector::Zero(9)), t, b);
  CHECK(zero.mu.norm() == 0.0);
  CHECK((zero.m - cv.m).norm() == 0.0);
}

TEST_CASE("Approach 2 model") {
  StructuredGrid g(2.0, 1.0, 24, 12);
  const KLBasis b = solve_separable_se_eigenproblem(g, kTheta, 20);
  const ObservationSet obs = node_obs(g, {30, 75, 140, 200, 260});
  const ConditionalKLModel m = truncate_then_condition(obs, kTheta, b);
  CHECK(m.r() == 15);
  CHECK(m.provenance == Provenance::kApproach2);
  const ConditionedVariables cv = condition_xi(obs, kTheta, b);
  const Matrix half = b.eigenfunctions * b.eigenvalues.cwiseSqrt().asDiagonal();
  const Matrix target = half * cv.m * half.transpose();
  CHECK((m.implied_covariance() - target).norm() <= 1e-8 * target.norm());
  // noise-free data is interpolated at the nodes
  for (Index k = 0; k < obs.size(); ++k) {
    const Index node = g.find_node(obs.locations()[static_cast<std::size_t>(k)]);
    CHECK(m.mean[node] == doctest::Approx(obs.values()[k]).epsilon(1e-8));
    CHECK(implied_moment_field(m).std[node] < 1e-6);
  }
  CHECK_THROWS_AS(truncate_then_condition(obs, kTheta, b.truncated(5)), FullyDetermined);
  CHECK_THROWS_AS(truncate_then_condition(obs, kTheta, b.truncated(4)), FullyDetermined);
}

TEST_CASE("weak conditioning far from the modes") {
  // long domain, modes concentrated left; one observation at the far right end
  StructuredGrid g(2.0, 1.0, 24, 12);
  const KernelHyperparams t{1.0, 0.1, 0.1, 0.0, LengthScaleConvention::kPlain};
  const KLBasis b = solve_separable_se_eigenproblem(g, t, 4);
  const ObservationSet obs({{1.98, 0.5}}, Vector::Ones(1));
  const ConditionedVariables cv = condition_xi(obs, t, b);
  CHECK(cv.rank == 3);
}

TEST_CASE("approaches differ at equal dimension and both reduce variance") {
  StructuredGrid g(2.0, 1.0, 40, 20);
  const ObservationSet obs = random_obs(10, 77);
  const KLBasis head = prior_head_basis(g, kTheta);
  const ConditionalKLModel a2 = truncate_then_condition(obs, kTheta, head.truncated(30));
  const ConditionalKLModel a1 = truncate_conditional_basis(conditional_basis(obs, kTheta, head, 40), a2.r());
  CHECK((a1.implied_covariance() - a2.implied_covariance()).norm() > 1e-6 * 0.4225);
  const double prior_mean_var = head.total_variance / 2.0;
  for (const auto* m : {&a1, &a2}) {
    const Vector v = implied_moment_field(*m).std.cwiseAbs2();
    CHECK(g.weights().dot(v) / 2.0 <= prior_mean_var);
  }
  const MomentField single = implied_moment_field(model_from_basis(head.truncated(1)));
  CHECK((single.std - (std::sqrt(head.eigenvalues[0]) * head.eigenfunctions.col(0)).cwiseAbs()).norm() < 1e-14);
}
