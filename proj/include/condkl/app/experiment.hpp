#pragma once

#include <optional>
#include <vector>

#include "condkl/active_learning.hpp"
#include "condkl/app/config.hpp"
#include "condkl/conditioning.hpp"
#include "condkl/pde_solver.hpp"
#include "condkl/uq_propagation.hpp"

namespace condkl::app {

StructuredGrid make_grid(const ExperimentConfig& cfg);
DiffusionProblem make_problem(const ExperimentConfig& cfg);

/// Reference log-coefficient field and the observations drawn from it.
struct Synthesis {
  StructuredGrid grid;
  Vector g_ref;
  ObservationSet obs;
};

/// The reference field is one realisation of the unconditional KL expansion
/// (every mode above the numerical floor); observation sites are uniform in
/// the domain and read the field by bilinear interpolation.
Synthesis synthesize(const ExperimentConfig& cfg);

FitResult fit_kernel(const ExperimentConfig& cfg, const ObservationSet& obs);

/// Configured hyperparameters, or the fitted ones when kernel.fit is set.
KernelHyperparams resolve_kernel(const ExperimentConfig& cfg, const ObservationSet& obs,
                                 std::optional<FitResult>* fit = nullptr);

struct Models {
  KLBasis head;  ///< unconditional modes above the numerical floor
  Index d = 0;
  ConditionalKLModel unconditional;
  /// Leading conditional eigenpairs; holds at least d_c modes.
  std::optional<KLBasis> conditional;
  std::optional<ConditionalKLModel> approach1;
  std::optional<ConditionalKLModel> approach2;
};

Models build_models(const ExperimentConfig& cfg, const KernelHyperparams& theta, const ObservationSet& obs,
                    bool approach1, bool approach2);

struct Propagation {
  std::optional<MonteCarloResult> mc;
  std::optional<CollocationResult> collocation;
};

Propagation propagate(const ExperimentConfig& cfg, const ConditionalKLModel& model, int threads);

struct ApproachError {
  double mean_g = 0.0;
  double std_g = 0.0;
  double mean_u = 0.0;
  double std_u = 0.0;
};

struct Comparison {
  Index r = 0;
  Index d = 0;
  Index d_c_reference = 0;
  MomentPair reference;  ///< Approach 1 at the retained fraction; u by Monte Carlo
  MomentPair approach1;  ///< collocation on the rank-r models
  MomentPair approach2;
  ApproachError error1;
  ApproachError error2;
  Index collocation_nodes = 0;
  Index clipped = 0;
};

Comparison compare_approaches(const ExperimentConfig& cfg, const KernelHyperparams& theta,
                              const ObservationSet& obs, int threads);

std::vector<Campaign> learn(const ExperimentConfig& cfg, const KernelHyperparams& theta, const Synthesis& syn,
                            int threads);

}  // namespace condkl::app
