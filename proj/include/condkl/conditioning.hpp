#pragma once

#include <string_view>

#include "condkl/grid.hpp"
#include "condkl/kernel_gp.hpp"
#include "condkl/kl_expansion.hpp"

namespace condkl {

enum class Provenance { kUnconditional, kApproach1, kApproach2 };

std::string_view to_string(Provenance p);

/// Finite-dimensional Gaussian model of g: a realisation is
/// mean + modes * zeta with zeta ~ N(0, I_r).
struct ConditionalKLModel {
  StructuredGrid grid;
  Vector mean;
  Matrix modes;  ///< nodes x r, already scaled
  Provenance provenance = Provenance::kUnconditional;
  /// Variances carried by the modes when they are orthogonal directions of
  /// the implied covariance (lambda^c for Approach 1, D_r for Approach 2).
  Vector spectrum;

  Index r() const { return modes.cols(); }
  Vector realize(const Vector& zeta) const;
  Matrix implied_covariance() const;
};

/// Unconditional model with modes sqrt(lambda_i) phi_i.
ConditionalKLModel model_from_basis(const KLBasis& basis, Provenance provenance = Provenance::kUnconditional);

/// Eigenvalues of M^d at or below this value count as zero when computing its
/// rank (M^d <= I, so this is relative to the prior scale).
inline constexpr double kRankTolerance = 1e-8;

/// Distribution N(mu, M) of the truncated KL coefficients given the data.
struct ConditionedVariables {
  Vector mu;
  Matrix m;
  Index rank = 0;
  Vector m_eigenvalues;  ///< non-increasing
  Matrix m_eigenvectors;
  /// Numerical jitter added to the noise variance; the rank ignores it.
  double jitter = 0.0;
};

enum class ConditionalEigenSolver {
  /// Rayleigh-Ritz in the unconditional eigenbasis (exact up to the dropped
  /// tail below head_floor * lambda_1).
  kReducedBasis,
  /// Dense Nystrom solve of the full conditional covariance matrix.
  kDense,
};

struct Approach1Options {
  ConditionalEigenSolver solver = ConditionalEigenSolver::kReducedBasis;
  double head_floor = 1e-15;
};

/// KL basis of the conditioned field: mean mu_g^c and the leading d_max
/// eigenpairs of C_g^c on the grid. total_variance is the weighted trace of
/// C_g^c.
KLBasis conditional_basis(const ObservationSet& obs, const KernelHyperparams& theta,
                          const StructuredGrid& grid, Index d_max, const Approach1Options& options = {});

/// Reduced-basis variant with a caller-supplied unconditional basis; the basis
/// should hold every mode above the numerical noise floor.
KLBasis conditional_basis(const ObservationSet& obs, const KernelHyperparams& theta,
                          const KLBasis& prior_head, Index d_max);

/// Leading unconditional modes needed by the reduced-basis solver.
KLBasis prior_head_basis(const StructuredGrid& grid, const KernelHyperparams& theta,
                         double head_floor = 1e-15);

/// Approach 1 with an explicit dimension.
ConditionalKLModel condition_then_truncate(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const StructuredGrid& grid, Index d_c,
                                           const Approach1Options& options = {});

/// Approach 1 model from an already computed conditional basis.
ConditionalKLModel truncate_conditional_basis(const KLBasis& conditional, Index d_c);

/// Approach 1 with d_c chosen as the smallest count retaining `fraction` of
/// the conditional variance.
ConditionalKLModel condition_then_truncate_by_variance(const ObservationSet& obs,
                                                       const KernelHyperparams& theta,
                                                       const KLBasis& prior_head, double fraction);

/// Conditions the truncated KL coefficients xi^d on the data. Eigenfunctions
/// are evaluated at the observation sites by bilinear interpolation.
ConditionedVariables condition_xi(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const KLBasis& basis);

/// Approach 2 on a basis already truncated to d modes.
ConditionalKLModel truncate_then_condition(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const KLBasis& basis);

/// Approach 2 starting from the unconditional SE kernel on the grid.
ConditionalKLModel truncate_then_condition(const ObservationSet& obs, const KernelHyperparams& theta,
                                           const StructuredGrid& grid, Index d);

/// Closed-form mean and standard deviation of a linear-Gaussian model.
MomentField implied_moment_field(const ConditionalKLModel& model);

}  // namespace condkl
