#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "condkl/grid.hpp"

namespace condkl {

/// -div(k grad u) = f on [0, lx] x [0, ly]; u prescribed on x1 = 0 and
/// x1 = lx, normal flux prescribed on x2 = 0 and x2 = ly.
struct DiffusionProblem {
  StructuredGrid grid;
  double dirichlet_left = 1.0;
  double dirichlet_right = 0.0;
  /// Nodal source f; empty means zero.
  Vector source;
  /// Optional per-row Dirichlet values (size ny) overriding the constants.
  Vector left_profile;
  Vector right_profile;
  /// Optional outward normal flux k du/dn per column (size nx); empty means
  /// zero flux.
  Vector bottom_flux;
  Vector top_flux;

  void validate() const;
};

struct SolutionField {
  Vector values;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LinearSystem {
  SparseMatrix matrix;
  Vector rhs;
};

/// Five-point cell-centred finite-volume system with harmonic-mean face
/// transmissibilities and half-cell Dirichlet distances.
LinearSystem assemble_diffusion(const DiffusionProblem& problem, const Vector& k);

/// Reusable solver. The sparsity pattern is analysed once; each call only
/// refactors. Not thread-safe; use one instance per thread.
class DiffusionSolver {
 public:
  explicit DiffusionSolver(DiffusionProblem problem);

  const DiffusionProblem& problem() const { return problem_; }

  /// Throws InvalidArgument for non-positive k and SolverFailure when the
  /// relative residual exceeds kResidualTolerance.
  SolutionField solve(const Vector& k);

  static constexpr double kResidualTolerance = 1e-10;

 private:
  DiffusionProblem problem_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  bool analysed_ = false;
};

SolutionField solve_diffusion(const DiffusionProblem& problem, const Vector& k);

/// Total flux in the +x1 direction through the vertical line between columns
/// face - 1 and face (face = 0 is x1 = 0, face = nx is x1 = lx).
double horizontal_flux(const DiffusionProblem& problem, const Vector& k, const Vector& u, int face);

}  // namespace condkl
