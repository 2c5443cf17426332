#pragma once

#include <Eigen/Cholesky>

#include "condkl/grid.hpp"

namespace condkl {

/// Cholesky factor of A + jitter * I. `jitter` is zero when the plain
/// factorisation succeeded.
struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
};

/// Factors a symmetric positive (semi)definite matrix. On failure retries with
/// jitter 1e-10 * scale, escalating by 10x up to 1e-6 * scale, then throws
/// IllConditioned. `scale` is the prior variance sigma^2.
JitteredCholesky factor_with_jitter(const Matrix& a, double scale);

/// Eigenpairs in non-increasing eigenvalue order.
struct EigenPairs {
  Vector values;
  Matrix vectors;
};

/// Leading k eigenpairs of a symmetric matrix (LAPACK dsyevr, index range).
/// Only the lower triangle of `a` is read.
EigenPairs top_eigenpairs(Matrix a, Index k);

/// All eigenpairs of a symmetric matrix.
EigenPairs symmetric_eigen(Matrix a);

/// Eigenvalues only, non-increasing.
Vector symmetric_eigenvalues(Matrix a);

}  // namespace condkl
