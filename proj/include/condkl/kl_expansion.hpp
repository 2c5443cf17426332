#pragma once

#include <functional>

#include "condkl/grid.hpp"
#include "condkl/kernel_gp.hpp"

namespace condkl {

/// Mean field plus weighted-orthonormal eigenpairs of a covariance operator
/// sampled at the grid nodes.
struct KLBasis {
  StructuredGrid grid;
  Vector mean;
  Vector eigenvalues;     ///< non-increasing, >= 0
  Matrix eigenfunctions;  ///< nodes x d, columns orthonormal under grid weights
  /// Weighted trace sum_i w_i C(x_i, x_i) of the full discrete operator; the
  /// denominator of the retained-variance fraction.
  double total_variance = 0.0;

  Index dim() const { return eigenvalues.size(); }
  /// First d eigenpairs.
  KLBasis truncated(Index d) const;
};

using CovarianceFunction = std::function<double(const Point&, const Point&)>;

/// Nystrom discretisation with midpoint quadrature: forms C_ij = cov(x_i, x_j),
/// solves W^1/2 C W^1/2 v = lambda v densely and maps back phi = W^-1/2 v.
KLBasis solve_kernel_eigenproblem(const StructuredGrid& grid, const CovarianceFunction& cov,
                                  Index d_max);

/// Same as above for an already assembled nodal covariance matrix.
KLBasis solve_covariance_eigenproblem(const StructuredGrid& grid, Matrix cov, Index d_max);

/// Exact fast path for the squared-exponential kernel on a tensor grid. The
/// weighted kernel matrix factors as a Kronecker product of two 1D Nystrom
/// matrices, so its eigenpairs are products of 1D eigenpairs.
KLBasis solve_separable_se_eigenproblem(const StructuredGrid& grid, const KernelHyperparams& theta,
                                        Index d_max);

/// Number of modes of the separable SE spectrum above rel_floor * lambda_1.
Index separable_se_significant_modes(const StructuredGrid& grid, const KernelHyperparams& theta,
                                     double rel_floor);

/// Smallest d with sum_{i<=d} lambda_i >= fraction * sum_all lambda_i.
Index truncate_by_variance(const Vector& eigenvalues, double fraction);

/// As above with an explicit total (for partial spectra). Throws if the
/// supplied eigenvalues do not reach the requested fraction.
Index truncate_by_variance(const Vector& eigenvalues, double fraction, double total);

/// mean + sum_i sqrt(lambda_i) phi_i xi_i
Vector evaluate_field(const KLBasis& basis, const Vector& xi);

/// sum_i lambda_i phi_i(x) phi_i(x') on all node pairs.
Matrix covariance_from_basis(const KLBasis& basis);

}  // namespace condkl
