#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condkl/conditioning.hpp"
#include "condkl/kernel_gp.hpp"
#include "condkl/pde_solver.hpp"

namespace condkl {

enum class AcquisitionMethod { kMethod1, kMethod2 };

std::string_view to_string(AcquisitionMethod m);
std::optional<AcquisitionMethod> parse_method(std::string_view s);

struct AcquisitionResult {
  Point location;
  Index candidate = -1;  ///< position in the candidate list
  AcquisitionMethod method = AcquisitionMethod::kMethod1;
  /// Objective per candidate: posterior variance (method 1, maximised) or
  /// J (method 2, minimised; NaN for skipped candidates).
  Vector criterion;
  /// Method 2 only: sum_x w(x) var_u(x), the upper bound of J.
  double objective_bound = 0.0;
  Index skipped = 0;
};

/// Grid nodes that do not coincide with an observation.
PointList default_candidates(const StructuredGrid& grid, const ObservationSet& obs);

/// argmax of the GP posterior variance over the candidates; ties go to the
/// lowest candidate index.
AcquisitionResult acquire_method1(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const PointList& candidates);

/// Sample (co)variances of paired ensembles. The cross-covariance is kept as
/// centred factors: cov_ug(x, x') = u_factor.row(x) . g_factor.row(x').
struct CrossCovariance {
  Vector var_g;
  Vector var_u;
  Matrix g_factor;  ///< nodes x M, centred and scaled by 1/sqrt(M - 1)
  Matrix u_factor;

  /// cov_ug(:, x') for node x'.
  Vector column(Index node) const { return u_factor * g_factor.row(node).transpose(); }
  Matrix expand() const { return u_factor * g_factor.transpose(); }
};

CrossCovariance sample_cross_covariances(const Matrix& g_ensemble, const Matrix& u_ensemble);

/// Candidates with var_g below this multiple of sigma^2 are skipped.
inline constexpr double kMethod2VarianceFloor = 1e-10;

/// J(x') = sum_x w(x) [var_u(x) - cov_ug(x, x')^2 / var_g(x')] for grid
/// nodes x'; NaN where var_g(x') <= floor.
Vector method2_objective(const StructuredGrid& grid, const CrossCovariance& cc, const std::vector<Index>& nodes,
                         double var_floor);

/// Picks argmin J over `candidates` given paired ensembles on the grid.
AcquisitionResult acquire_method2_from_ensemble(const StructuredGrid& grid, const Matrix& g_ensemble,
                                                const Matrix& u_ensemble, const KernelHyperparams& theta,
                                                const PointList& candidates);

/// Draws M realisations of g^c from the model, solves the PDE for each and
/// minimises J over the candidates (which must be grid nodes).
AcquisitionResult acquire_method2(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const ConditionalKLModel& model, const DiffusionProblem& problem, Index m,
                                  std::uint64_t seed, const PointList& candidates, int threads = 1);

struct CampaignOptions {
  AcquisitionMethod method = AcquisitionMethod::kMethod1;
  int n_am = 1;
  Index mc_samples = 1000;
  Index ensemble_size = 200;
  double retained_fraction = 0.99;
  std::uint64_t seed = 0;
  int threads = 1;
  bool keep_criteria = false;
};

struct CampaignStep {
  int step = 0;  ///< 0 is the initial state
  Point location{std::nan(""), std::nan("")};
  double value = std::nan("");
  Index d_c = 0;
  double norm_g = 0.0;
  double norm_u = 0.0;
  /// Method 2 acquisitions: extremes of J and its bound at this step.
  double j_min = std::nan("");
  double j_max = std::nan("");
  double j_bound = std::nan("");
};

struct Campaign {
  AcquisitionMethod method = AcquisitionMethod::kMethod1;
  std::vector<CampaignStep> steps;
  std::vector<Vector> criteria;
  /// Set when the campaign aborted; steps holds what completed.
  std::optional<std::string> error;

  /// True when every recorded Method 2 objective satisfied 0 <= J <= bound.
  bool bound_holds = true;
};

/// Sequential acquisition against a reference field. After each acquisition
/// the conditional model is rebuilt (condition then truncate, retained
/// variance fraction); norm_g uses the exact GP posterior std, norm_u a Monte
/// Carlo estimate on the rebuilt model.
Campaign run_campaign(const Vector& g_ref, const ObservationSet& initial, const KernelHyperparams& theta,
                      const DiffusionProblem& problem, const CampaignOptions& options);

}  // namespace condkl
