#include "condkl/linalg.hpp"

#include <lapacke.h>

#include <string>
#include <vector>

#include "condkl/error.hpp"

namespace condkl {

JitteredCholesky factor_with_jitter(const Matrix& a, double scale) {
  JitteredCholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;
  const Index n = a.rows();
  for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += rel * scale;
    out.llt.compute(shifted);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = rel * scale;
      return out;
    }
  }
  throw IllConditioned("covariance matrix of size " + std::to_string(n) +
                       " is not positive definite even with jitter 1e-6*sigma^2");
}

namespace {

EigenPairs run_dsyevr(Matrix& a, Index first, Index last, bool vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  const lapack_int m_req = static_cast<lapack_int>(last - first + 1);
  Vector w(n);
  Matrix z(vectors ? n : 1, vectors ? m_req : 1);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max<lapack_int>(n, 1)));
  lapack_int m = 0;
  // Eigen is column-major; reading the lower triangle of the column-major
  // array is what LAPACK calls 'L'.
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', 'L', n, a.data(), n, 0.0, 0.0,
      static_cast<lapack_int>(first + 1), static_cast<lapack_int>(last + 1), 0.0, &m, w.data(),
      z.data(), vectors ? n : 1, isuppz.data());
  if (info != 0) throw Error("dsyevr failed with info = " + std::to_string(info));
  // LAPACK returns ascending order; flip.
  EigenPairs out;
  out.values = w.head(m).reverse();
  if (vectors) out.vectors = z.leftCols(m).rowwise().reverse();
  return out;
}

}  // namespace

EigenPairs top_eigenpairs(Matrix a, Index k) {
  const Index n = a.rows();
  if (a.cols() != n) throw InvalidArgument("top_eigenpairs: matrix must be square");
  if (k < 1 || k > n) throw InvalidArgument("top_eigenpairs: k must be in [1, n]");
  return run_dsyevr(a, n - k, n - 1, true);
}

EigenPairs symmetric_eigen(Matrix a) {
  const Index n = a.rows();
  if (a.cols() != n || n == 0) throw InvalidArgument("symmetric_eigen: matrix must be square");
  return run_dsyevr(a, 0, n - 1, true);
}

Vector symmetric_eigenvalues(Matrix a) {
  const Index n = a.rows();
  if (a.cols() != n || n == 0) throw InvalidArgument("symmetric_eigenvalues: matrix must be square");
  return run_dsyevr(a, 0, n - 1, false).values;
}

}  // namespace condkl
