#pragma once

#include <cstdint>
#include <vector>

#include "condkl/conditioning.hpp"
#include "condkl/grid.hpp"
#include "condkl/pde_solver.hpp"
#include "condkl/sparse_grid.hpp"

namespace condkl {

/// sqrt(sum_i w_i f_i^2) with the grid's cell-area weights.
double field_l2_norm(const StructuredGrid& grid, const Vector& field);

struct MomentPair {
  MomentField g;
  MomentField u;
};

/// L2 norms of the running estimators after n samples.
struct ConvergencePoint {
  Index n = 0;
  double mean_g = 0.0;
  double std_g = 0.0;
  double mean_u = 0.0;
  double std_u = 0.0;
};

struct MonteCarloOptions {
  int threads = 1;
  /// Sample counts at which to record estimator norms (ascending, <= n).
  std::vector<Index> checkpoints;
};

struct MonteCarloResult {
  MomentPair moments;
  Index samples = 0;
  std::vector<ConvergencePoint> convergence;
};

/// Realisation j uses zeta from NormalStream(seed, j); sample moments use
/// the (n - 1) denominator and are accumulated in realisation order, so the
/// result is bitwise independent of the thread count.
MonteCarloResult monte_carlo_moments(const ConditionalKLModel& model, const DiffusionProblem& problem,
                                     Index n, std::uint64_t seed, const MonteCarloOptions& options = {});

MonteCarloResult monte_carlo_moments(const KLBasis& basis, const DiffusionProblem& problem, Index n,
                                     std::uint64_t seed, const MonteCarloOptions& options = {});

struct CollocationResult {
  MomentPair moments;
  Index nodes_solved = 0;
  /// Nodes of the physical grid where the quadrature variance came out
  /// negative and was clipped to zero.
  Index clipped_g = 0;
  Index clipped_u = 0;
};

CollocationResult collocation_moments(const ConditionalKLModel& model, const DiffusionProblem& problem,
                                      const SparseGridRule& rule, int threads = 1);

/// Paired realisations (one column each) of g and of the PDE solution.
struct Ensemble {
  Matrix g;
  Matrix u;
};

Ensemble draw_ensemble(const ConditionalKLModel& model, const DiffusionProblem& problem, Index m,
                       std::uint64_t seed, int threads = 1);

}  // namespace condkl
