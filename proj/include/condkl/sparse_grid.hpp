#pragma once

#include "condkl/grid.hpp"

namespace condkl {

/// One-dimensional quadrature rule, nodes ascending.
struct QuadratureRule {
  Vector nodes;
  Vector weights;
};

/// n-point Gauss-Hermite rule for the standard normal density
/// (probabilists' convention; weights sum to 1). Golub-Welsch.
QuadratureRule gauss_hermite(int n);

/// Smolyak combination of Gauss-Hermite rules with m(i) = i points at level i.
struct SparseGridRule {
  int dim = 0;
  int level = 0;
  Matrix nodes;  ///< one node per row
  Vector weights;

  Index size() const { return weights.size(); }
};

/// Nodes within kNodeMergeTolerance in every coordinate are merged and their
/// weights summed.
inline constexpr double kNodeMergeTolerance = 1e-12;

SparseGridRule smolyak_grid(int dim, int level);

}  // namespace condkl
