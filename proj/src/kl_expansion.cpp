#include "condkl/kl_expansion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "condkl/error.hpp"
#include "condkl/linalg.hpp"

namespace condkl {

KLBasis KLBasis::truncated(Index d) const {
  if (d < 1 || d > dim()) throw InvalidArgument("KLBasis::truncated: d out of range");
  KLBasis out;
  out.grid = grid;
  out.mean = mean;
  out.eigenvalues = eigenvalues.head(d);
  out.eigenfunctions = eigenfunctions.leftCols(d);
  out.total_variance = total_variance;
  return out;
}

namespace {

// Clips roundoff-level negative eigenvalues; anything more negative means the
// operator is not a covariance.
void clip_spectrum(Vector& values) {
  if (values.size() == 0) return;
  const double top = std::max(values[0], 0.0);
  for (Index i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      if (values[i] < -1e-10 * top && top > 0.0)
        throw InvalidArgument("covariance operator has a negative eigenvalue " +
                              std::to_string(values[i]));
      values[i] = 0.0;
    }
  }
}

}  // namespace

KLBasis solve_covariance_eigenproblem(const StructuredGrid& grid, Matrix cov, Index d_max) {
  const Index n = grid.size();
  if (cov.rows() != n || cov.cols() != n)
    throw InvalidArgument("covariance matrix does not match the grid");
  if (d_max < 1 || d_max > n) throw InvalidArgument("d_max must be in [1, nx*ny]");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidArgument("covariance is not symmetric");

  const Vector sqrt_w = grid.weights().cwiseSqrt();
  const double total = grid.weights().dot(cov.diagonal());
  cov = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();
  auto pairs = top_eigenpairs(std::move(cov), d_max);

  KLBasis out;
  out.grid = grid;
  out.mean = Vector::Zero(n);
  out.eigenvalues = std::move(pairs.values);
  clip_spectrum(out.eigenvalues);
  out.eigenfunctions = sqrt_w.cwiseInverse().asDiagonal() * pairs.vectors;
  out.total_variance = total;
  return out;
}

KLBasis solve_kernel_eigenproblem(const StructuredGrid& grid, const CovarianceFunction& cov,
                                  Index d_max) {
  const Index n = grid.size();
  if (d_max < 1 || d_max > n) throw InvalidArgument("d_max must be in [1, nx*ny]");
  const PointList nodes = grid.nodes();
  Matrix c(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      c(i, j) = cov(nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)]);
  return solve_covariance_eigenproblem(grid, std::move(c), d_max);
}

namespace {

struct Spectrum1D {
  Vector values;   // non-increasing
  Matrix vectors;  // weighted-orthonormal eigenfunctions, columns
};

Spectrum1D one_dimensional(int n, double h, double inv_scale) {
  Matrix k(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double d = (i - j) * h;
      k(i, j) = h * std::exp(-d * d * inv_scale);
    }
  auto pairs = symmetric_eigen(std::move(k));
  pairs.values = pairs.values.cwiseMax(0.0);
  return {std::move(pairs.values), pairs.vectors / std::sqrt(h)};
}

struct ProductSpectrum {
  Spectrum1D x;
  Spectrum1D y;
  std::vector<std::pair<int, int>> order;  // sorted (ix, iy) pairs
  Vector values;
};

ProductSpectrum product_spectrum(const StructuredGrid& grid, const KernelHyperparams& theta) {
  theta.validate();
  const double f = theta.convention == LengthScaleConvention::kRbf ? 0.5 : 1.0;
  ProductSpectrum s;
  s.x = one_dimensional(grid.nx(), grid.hx(), f / (theta.l1 * theta.l1));
  s.y = one_dimensional(grid.ny(), grid.hy(), f / (theta.l2 * theta.l2));
  const Index n = grid.size();
  Vector raw(n);
  for (int b = 0; b < grid.ny(); ++b)
    for (int a = 0; a < grid.nx(); ++a)
      raw[a + static_cast<Index>(grid.nx()) * b] = theta.variance() * s.x.values[a] * s.y.values[b];
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index i, Index j) { return raw[i] > raw[j]; });
  s.values.resize(n);
  s.order.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const Index i = idx[static_cast<std::size_t>(k)];
    s.values[k] = raw[i];
    s.order[static_cast<std::size_t>(k)] = {static_cast<int>(i % grid.nx()),
                                            static_cast<int>(i / grid.nx())};
  }
  return s;
}

}  // namespace

KLBasis solve_separable_se_eigenproblem(const StructuredGrid& grid, const KernelHyperparams& theta,
                                        Index d_max) {
  const Index n = grid.size();
  if (d_max < 1 || d_max > n) throw InvalidArgument("d_max must be in [1, nx*ny]");
  ProductSpectrum s = product_spectrum(grid, theta);

  KLBasis out;
  out.grid = grid;
  out.mean = Vector::Zero(n);
  out.eigenvalues = s.values.head(d_max);
  clip_spectrum(out.eigenvalues);
  out.eigenfunctions.resize(n, d_max);
  for (Index k = 0; k < d_max; ++k) {
    const auto [a, b] = s.order[static_cast<std::size_t>(k)];
    for (int iy = 0; iy < grid.ny(); ++iy)
      for (int ix = 0; ix < grid.nx(); ++ix)
        out.eigenfunctions(grid.index(ix, iy), k) = s.x.vectors(ix, a) * s.y.vectors(iy, b);
  }
  // Weighted trace of sigma^2 on the diagonal.
  out.total_variance = theta.variance() * grid.weights().sum();
  return out;
}

Index separable_se_significant_modes(const StructuredGrid& grid, const KernelHyperparams& theta,
                                     double rel_floor) {
  const ProductSpectrum s = product_spectrum(grid, theta);
  const double cut = rel_floor * s.values[0];
  Index k = 0;
  while (k < s.values.size() && s.values[k] > cut) ++k;
  return std::max<Index>(k, 1);
}

Index truncate_by_variance(const Vector& eigenvalues, double fraction) {
  return truncate_by_variance(eigenvalues, fraction, eigenvalues.sum());
}

Index truncate_by_variance(const Vector& eigenvalues, double fraction, double total) {
  if (!(fraction > 0.0) || fraction > 1.0) throw InvalidArgument("fraction must be in (0, 1]");
  if (!(total > 0.0)) throw InvalidArgument("truncate_by_variance: all-zero spectrum");
  const double target = fraction * total;
  double acc = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    acc += eigenvalues[i];
    // relative slack absorbs summation roundoff when fraction == 1
    if (acc >= target * (1.0 - 1e-14)) return i + 1;
  }
  throw InvalidArgument("truncate_by_variance: supplied eigenvalues capture only " +
                        std::to_string(acc / total) + " of the variance");
}

Vector evaluate_field(const KLBasis& basis, const Vector& xi) {
  if (xi.size() != basis.dim()) throw InvalidArgument("evaluate_field: xi has wrong dimension");
  return basis.mean + basis.eigenfunctions * (basis.eigenvalues.cwiseSqrt().cwiseProduct(xi));
}

Matrix covariance_from_basis(const KLBasis& basis) {
  const Matrix scaled = basis.eigenfunctions * basis.eigenvalues.cwiseSqrt().asDiagonal();
  return scaled * scaled.transpose();
}

}  // namespace condkl
