#include "condkl/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "condkl/error.hpp"
#include "condkl/linalg.hpp"

namespace condkl {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kApproach1:
      return "approach-1";
    case Provenance::kApproach2:
      return "approach-2";
    case Provenance::kUnconditional:
      break;
  }
  return "unconditional";
}

Vector ConditionalKLModel::realize(const Vector& zeta) const {
  if (zeta.size() != r()) throw InvalidArgument("realize: zeta has wrong dimension");
  return mean + modes * zeta;
}

Matrix ConditionalKLModel::implied_covariance() const { return modes * modes.transpose(); }

ConditionalKLModel model_from_basis(const KLBasis& basis, Provenance provenance) {
  ConditionalKLModel m;
  m.grid = basis.grid;
  m.mean = basis.mean;
  m.modes = basis.eigenfunctions * basis.eigenvalues.cwiseSqrt().asDiagonal();
  m.provenance = provenance;
  m.spectrum = basis.eigenvalues;
  return m;
}

KLBasis prior_head_basis(const StructuredGrid& grid, const KernelHyperparams& theta, double head_floor) {
  const Index k = separable_se_significant_modes(grid, theta, head_floor);
  return solve_separable_se_eigenproblem(grid, theta, k);
}

KLBasis conditional_basis(const ObservationSet& obs, const KernelHyperparams& theta,
                          const KLBasis& prior_head, Index d_max) {
  const StructuredGrid& grid = prior_head.grid;
  if (d_max < 1 || d_max > prior_head.dim())
    throw InvalidArgument("conditional_basis: d_max exceeds the prior head dimension");
  const PointList nodes = grid.nodes();
  GpRegression gp(obs, theta);
  const Matrix b = gp.whitened_cross(nodes);

  // Posterior covariance in prior eigen-coordinates: Lambda - Z Z^T.
  const Matrix z = prior_head.eigenfunctions.transpose() * (grid.weights().asDiagonal() * b);
  Matrix reduced = -z * z.transpose();
  reduced.diagonal() += prior_head.eigenvalues;
  auto pairs = top_eigenpairs(std::move(reduced), d_max);

  KLBasis out;
  out.grid = grid;
  out.mean = gp.mean(nodes);
  out.eigenvalues = pairs.values.cwiseMax(0.0);
  out.eigenfunctions = prior_head.eigenfunctions * pairs.vectors;
  const Vector diag = (Vector::Constant(grid.size(), theta.variance()) - b.rowwise().squaredNorm()).cwiseMax(0.0);
  out.total_variance = grid.weights().dot(diag);
  return out;
}

KLBasis conditional_basis(const ObservationSet& obs, const KernelHyperparams& theta,
                          const StructuredGrid& grid, Index d_max, const Approach1Options& options) {
  if (options.solver == ConditionalEigenSolver::kReducedBasis) {
    const KLBasis head = prior_head_basis(grid, theta, options.head_floor);
    return conditional_basis(obs, theta, head, std::min(d_max, head.dim()));
  }
  const PointList nodes = grid.nodes();
  GpRegression gp(obs, theta);
  KLBasis out = solve_covariance_eigenproblem(grid, gp.covariance(nodes), d_max);
  out.mean = gp.mean(nodes);
  return out;
}

ConditionalKLModel truncate_conditional_basis(const KLBasis& conditional, Index d_c) {
  return model_from_basis(conditional.truncated(d_c), Provenance::kApproach1);
}

ConditionalKLModel condition_then_truncate(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const StructuredGrid& grid, Index d_c,
                                           const Approach1Options& options) {
  if (d_c < 1) throw InvalidArgument("condition_then_truncate: d_c must be >= 1");
  const KLBasis cond = conditional_basis(obs, theta, grid, d_c, options);
  return truncate_conditional_basis(cond, std::min(d_c, cond.dim()));
}

ConditionalKLModel condition_then_truncate_by_variance(const ObservationSet& obs,
                                                       const KernelHyperparams& theta,
                                                       const KLBasis& prior_head, double fraction) {
  Index d_max = std::min<Index>(prior_head.dim(), 256);
  for (;;) {
    const KLBasis cond = conditional_basis(obs, theta, prior_head, d_max);
    try {
      const Index d_c = truncate_by_variance(cond.eigenvalues, fraction, cond.total_variance);
      return truncate_conditional_basis(cond, d_c);
    } catch (const InvalidArgument&) {
      if (d_max == prior_head.dim()) throw;
      d_max = std::min(prior_head.dim(), 4 * d_max);
    }
  }
}

namespace {

// Factorisation succeeds when the smallest eigenvalue clears this fraction of
// the largest; mirrors where a Cholesky of the same matrix breaks down.
constexpr double kFactorRelTol = 1e-14;

}  // namespace

ConditionedVariables condition_xi(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const KLBasis& basis) {
  theta.validate();
  const Index d = basis.dim();
  const Index ns = obs.size();
  const StructuredGrid& grid = basis.grid;

  // A = Lambda^1/2 Phi(X), d x N_s
  Matrix a(d, ns);
  for (Index k = 0; k < ns; ++k) {
    const Stencil st = grid.stencil(obs.locations()[static_cast<std::size_t>(k)]);
    for (Index i = 0; i < d; ++i) {
      double v = 0.0;
      for (int q = 0; q < 4; ++q) v += st.weights[q] * basis.eigenfunctions(st.nodes[q], i);
      a(i, k) = v;
    }
  }
  a = basis.eigenvalues.cwiseSqrt().asDiagonal() * a;

  // C_s^d + sigma_eps^2 I = V (S^2 + delta) V^T; work in the SVD of A so that
  // the noise-free projector is formed without squaring the condition number.
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vector s = svd.singularValues();
  const Index p = s.size();
  const double scale = theta.variance();
  auto eig_bounds = [&](double delta) {
    const double top = (p > 0 ? s[0] * s[0] : 0.0) + delta;
    const double bottom = (p < ns) ? delta : s[p - 1] * s[p - 1] + delta;
    return std::pair{bottom, top};
  };
  double delta = theta.sigma_eps * theta.sigma_eps;
  double jitter = 0.0;
  if (auto [lo, hi] = eig_bounds(delta); !(lo > kFactorRelTol * hi)) {
    bool ok = false;
    for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
      jitter = rel * scale;
      auto [lo2, hi2] = eig_bounds(delta + jitter);
      if (lo2 > kFactorRelTol * hi2) {
        ok = true;
        break;
      }
    }
    if (!ok) throw IllConditioned("condition_xi: C_s^d + sigma_eps^2 I is singular after jitter");
    delta += jitter;
  }

  const Matrix& u = svd.matrixU();
  const Matrix v = svd.matrixV().leftCols(p);
  const Vector s2 = s.array().square();
  const Vector shrink = (s2.array() / (s2.array() + delta)).matrix();
  const Vector gain = (s.array() / (s2.array() + delta)).matrix();

  ConditionedVariables out;
  out.jitter = jitter;
  out.mu = u * (gain.asDiagonal() * (v.transpose() * obs.values()));
  out.m = Matrix::Identity(d, d) - u * shrink.asDiagonal() * u.transpose();
  out.m = 0.5 * (out.m + out.m.transpose()).eval();
  auto pairs = symmetric_eigen(out.m);
  out.m_eigenvalues = std::move(pairs.values);
  out.m_eigenvectors = std::move(pairs.vectors);
  // Rank of M^d at the noise level alone: eigenvalues sigma_eps^2 / (s^2 +
  // sigma_eps^2) along the p data directions and 1 along the d - p others.
  // The jitter only stabilises the factorisation and would otherwise leave
  // spurious O(jitter / s^2) eigenvalues in directions the data pin down.
  const double noise = theta.sigma_eps * theta.sigma_eps;
  const double s0sq = p > 0 ? s[0] * s[0] : 0.0;
  Index rank = d - p;
  for (Index i = 0; i < p; ++i) {
    const double si2 = s2[i] > kFactorRelTol * s0sq ? s2[i] : 0.0;
    const double ev = si2 + noise > 0.0 ? noise / (si2 + noise) : 1.0;
    if (ev > kRankTolerance) ++rank;
  }
  out.rank = rank;
  return out;
}

ConditionalKLModel truncate_then_condition(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const KLBasis& basis) {
  const ConditionedVariables cv = condition_xi(obs, theta, basis);
  const Index r = cv.rank;
  if (r == 0) throw FullyDetermined("truncate_then_condition: conditioning leaves r = 0 dimensions");

  const Matrix scaled = basis.eigenfunctions * basis.eigenvalues.cwiseSqrt().asDiagonal();
  ConditionalKLModel m;
  m.grid = basis.grid;
  m.mean = scaled * cv.mu;
  const Vector d_r = cv.m_eigenvalues.head(r);
  m.modes = scaled * (cv.m_eigenvectors.leftCols(r) * d_r.cwiseSqrt().asDiagonal());
  m.provenance = Provenance::kApproach2;
  m.spectrum = d_r;
  return m;
}

ConditionalKLModel truncate_then_condition(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const StructuredGrid& grid, Index d) {
  return truncate_then_condition(obs, theta, solve_separable_se_eigenproblem(grid, theta, d));
}

MomentField implied_moment_field(const ConditionalKLModel& model) {
  return {model.mean, model.modes.rowwise().norm()};
}

}  // namespace condkl
