#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "condkl/grid.hpp"
#include "condkl/linalg.hpp"

namespace condkl {

/// How the correlation lengths enter the exponent of the squared-exponential
/// kernel.
///   kPlain: exp(-dx1^2 / l1^2 - dx2^2 / l2^2)
///   kRbf:   exp(-dx1^2 / (2 l1^2) - dx2^2 / (2 l2^2))   (GP-library convention)
enum class LengthScaleConvention { kPlain, kRbf };

std::string_view to_string(LengthScaleConvention c);
std::optional<LengthScaleConvention> parse_convention(std::string_view s);

struct KernelHyperparams {
  double sigma = 1.0;
  double l1 = 1.0;
  double l2 = 1.0;
  double sigma_eps = 0.0;
  LengthScaleConvention convention = LengthScaleConvention::kPlain;

  double variance() const { return sigma * sigma; }
  /// Throws InvalidArgument unless sigma, l1, l2 > 0 and sigma_eps >= 0.
  void validate() const;
};

/// Point observations of g. Locations are pairwise distinct.
class ObservationSet {
 public:
  ObservationSet(PointList locations, Vector values);

  Index size() const { return values_.size(); }
  const PointList& locations() const { return locations_; }
  const Vector& values() const { return values_; }

  /// Copy with one more observation appended.
  ObservationSet with(const Point& location, double value) const;

  /// Throws unless every location lies in [0, lx] x [0, ly].
  void check_inside(double lx, double ly) const;

 private:
  PointList locations_;
  Vector values_;
};

double kernel_eval(const Point& x, const Point& x_prime, const KernelHyperparams& theta);

Matrix cov_matrix(const PointList& a, const PointList& b, const KernelHyperparams& theta);

double log_marginal_likelihood(const ObservationSet& obs, const KernelHyperparams& theta);

/// GP regression conditioned on a fixed observation set. Holds the jittered
/// Cholesky factor of C_s + sigma_eps^2 I so repeated queries are cheap.
class GpRegression {
 public:
  GpRegression(const ObservationSet& obs, const KernelHyperparams& theta);

  const KernelHyperparams& theta() const { return theta_; }
  double jitter() const { return factor_.jitter; }

  Vector mean(const PointList& query) const;

  /// B = C_g(query, X) L^{-T}, so that the posterior covariance is
  /// C_g(query, query') - B B'^T.
  Matrix whitened_cross(const PointList& query) const;

  Vector variance(const PointList& query) const;
  Matrix covariance(const PointList& query) const;

 private:
  ObservationSet obs_;
  KernelHyperparams theta_;
  JitteredCholesky factor_;
  Vector alpha_;
};

struct GpPosterior {
  Vector mean;
  Matrix cov;
};

GpPosterior gp_posterior(const ObservationSet& obs, const KernelHyperparams& theta,
                         const PointList& query);

struct FitOptions {
  /// Optimise sigma_eps as a fourth parameter; otherwise it stays at the
  /// value carried by each start.
  bool fit_noise = false;
  int max_evaluations = 4000;
  double simplex_tolerance = 1e-7;
  int default_starts = 8;
  std::uint64_t seed = 0;
};

struct FitResult {
  KernelHyperparams theta;
  double lml = 0.0;
  /// False when no start improved on the best initial guess; theta is then
  /// that initial guess.
  bool improved = true;
};

/// Log-uniform draws in [0.1, 10] x data-scale heuristics (sample std of y,
/// one fifth of the observation bounding box per axis).
std::vector<KernelHyperparams> default_initial_guesses(const ObservationSet& obs, int count,
                                                       std::uint64_t seed,
                                                       LengthScaleConvention convention,
                                                       double sigma_eps = 0.0);

/// Type-II maximum likelihood by Nelder-Mead in log-parameter space from each
/// start; returns the best optimum found.
FitResult fit_hyperparameters(const ObservationSet& obs, const std::vector<KernelHyperparams>& init,
                              const FitOptions& options = {});

}  // namespace condkl
