#include "condkl/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condkl/error.hpp"
#include "condkl/random.hpp"
#include "condkl/uq_propagation.hpp"

namespace condkl {

std::string_view to_string(AcquisitionMethod m) {
  return m == AcquisitionMethod::kMethod1 ? "method-1" : "method-2";
}

std::optional<AcquisitionMethod> parse_method(std::string_view s) {
  if (s == "method-1" || s == "1" || s == "method1") return AcquisitionMethod::kMethod1;
  if (s == "method-2" || s == "2" || s == "method2") return AcquisitionMethod::kMethod2;
  return std::nullopt;
}

PointList default_candidates(const StructuredGrid& grid, const ObservationSet& obs) {
  std::vector<bool> taken(static_cast<std::size_t>(grid.size()), false);
  for (const Point& p : obs.locations()) {
    const Index i = grid.find_node(p);
    if (i >= 0) taken[static_cast<std::size_t>(i)] = true;
  }
  PointList out;
  for (Index i = 0; i < grid.size(); ++i)
    if (!taken[static_cast<std::size_t>(i)]) out.push_back(grid.node(i));
  return out;
}

namespace {

void check_disjoint(const ObservationSet& obs, const PointList& candidates) {
  if (candidates.empty()) throw InvalidArgument("candidate list is empty");
  constexpr double tol = 1e-12;
  for (const Point& c : candidates)
    for (const Point& o : obs.locations())
      if (std::abs(c.x1 - o.x1) <= tol && std::abs(c.x2 - o.x2) <= tol)
        throw InvalidArgument("candidate coincides with an existing observation");
}

}  // namespace

AcquisitionResult acquire_method1(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const PointList& candidates) {
  check_disjoint(obs, candidates);
  GpRegression gp(obs, theta);
  AcquisitionResult r;
  r.method = AcquisitionMethod::kMethod1;
  r.criterion = gp.variance(candidates);
  Index best = 0;
  for (Index i = 1; i < r.criterion.size(); ++i)
    if (r.criterion[i] > r.criterion[best]) best = i;
  r.candidate = best;
  r.location = candidates[static_cast<std::size_t>(best)];
  return r;
}

CrossCovariance sample_cross_covariances(const Matrix& g_ensemble, const Matrix& u_ensemble) {
  const Index m = g_ensemble.cols();
  if (m < 2) throw InvalidArgument("sample_cross_covariances: need at least 2 realisations");
  if (u_ensemble.cols() != m || u_ensemble.rows() != g_ensemble.rows())
    throw InvalidArgument("sample_cross_covariances: ensembles differ in shape");
  const double scale = 1.0 / std::sqrt(static_cast<double>(m - 1));
  CrossCovariance cc;
  cc.g_factor = (g_ensemble.colwise() - g_ensemble.rowwise().mean()) * scale;
  cc.u_factor = (u_ensemble.colwise() - u_ensemble.rowwise().mean()) * scale;
  cc.var_g = cc.g_factor.rowwise().squaredNorm();
  cc.var_u = cc.u_factor.rowwise().squaredNorm();
  return cc;
}

Vector method2_objective(const StructuredGrid& grid, const CrossCovariance& cc, const std::vector<Index>& nodes,
                         double var_floor) {
  const Vector& w = grid.weights();
  const double bound = w.dot(cc.var_u);
  Vector j(static_cast<Index>(nodes.size()));
  // Candidate columns are expanded in blocks to bound memory.
  constexpr Index kCols = 256;
  const Matrix wu = w.asDiagonal() * cc.u_factor;
  for (Index start = 0; start < j.size(); start += kCols) {
    const Index count = std::min(kCols, j.size() - start);
    Matrix gsel(count, cc.g_factor.cols());
    for (Index c = 0; c < count; ++c) gsel.row(c) = cc.g_factor.row(nodes[static_cast<std::size_t>(start + c)]);
    const Matrix cov = cc.u_factor * gsel.transpose();  // nodes x count
    const Matrix wcov = wu * gsel.transpose();
    for (Index c = 0; c < count; ++c) {
      const double vg = cc.var_g[nodes[static_cast<std::size_t>(start + c)]];
      if (vg <= var_floor) {
        j[start + c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      j[start + c] = bound - cov.col(c).dot(wcov.col(c)) / vg;
    }
  }
  return j;
}

AcquisitionResult acquire_method2_from_ensemble(const StructuredGrid& grid, const Matrix& g_ensemble,
                                                const Matrix& u_ensemble, const KernelHyperparams& theta,
                                                const PointList& candidates) {
  if (candidates.empty()) throw InvalidArgument("candidate list is empty");
  std::vector<Index> nodes;
  nodes.reserve(candidates.size());
  for (const Point& p : candidates) {
    const Index i = grid.find_node(p);
    if (i < 0) throw InvalidArgument("method 2 candidates must be grid nodes");
    nodes.push_back(i);
  }
  const CrossCovariance cc = sample_cross_covariances(g_ensemble, u_ensemble);
  AcquisitionResult r;
  r.method = AcquisitionMethod::kMethod2;
  r.objective_bound = grid.weights().dot(cc.var_u);
  r.criterion = method2_objective(grid, cc, nodes, kMethod2VarianceFloor * theta.variance());
  Index best = -1;
  for (Index i = 0; i < r.criterion.size(); ++i) {
    if (std::isnan(r.criterion[i])) {
      ++r.skipped;
      continue;
    }
    if (best < 0 || r.criterion[i] < r.criterion[best]) best = i;
  }
  if (best < 0) throw Error("method 2: every candidate has vanishing sample variance of g");
  r.candidate = best;
  r.location = candidates[static_cast<std::size_t>(best)];
  return r;
}

AcquisitionResult acquire_method2(const ObservationSet& obs, const KernelHyperparams& theta,
                                  const ConditionalKLModel& model, const DiffusionProblem& problem, Index m,
                                  std::uint64_t seed, const PointList& candidates, int threads) {
  if (m < 2) throw InvalidArgument("acquire_method2: M must be >= 2");
  check_disjoint(obs, candidates);
  const Ensemble e = draw_ensemble(model, problem, m, seed, threads);
  return acquire_method2_from_ensemble(problem.grid, e.g, e.u, theta, candidates);
}

namespace {

// Seed labels for the independent random consumers of a campaign.
constexpr std::uint64_t kLabelMc = 1000;
constexpr std::uint64_t kLabelEnsemble = 2000;
constexpr std::uint64_t kLabelNoise = 3000;

}  // namespace

Campaign run_campaign(const Vector& g_ref, const ObservationSet& initial, const KernelHyperparams& theta,
                      const DiffusionProblem& problem, const CampaignOptions& options) {
  if (options.n_am < 1) throw InvalidArgument("run_campaign: N_am must be >= 1");
  const StructuredGrid& grid = problem.grid;
  if (g_ref.size() != grid.size()) throw InvalidArgument("run_campaign: reference field does not match the grid");

  Campaign campaign;
  campaign.method = options.method;
  ObservationSet obs = initial;
  MonteCarloOptions mc;
  mc.threads = options.threads;

  try {
    const KLBasis head = prior_head_basis(grid, theta);
    const PointList nodes = grid.nodes();
    CampaignStep pending;
    for (int step = 0; step <= options.n_am; ++step) {
      const ConditionalKLModel model =
          condition_then_truncate_by_variance(obs, theta, head, options.retained_fraction);
      CampaignStep rec = pending;
      rec.step = step;
      rec.d_c = model.r();
      rec.norm_g = field_l2_norm(grid, GpRegression(obs, theta).variance(nodes).cwiseSqrt());
      rec.norm_u = field_l2_norm(
          grid, monte_carlo_moments(model, problem, options.mc_samples, derive_seed(options.seed, kLabelMc + step), mc)
                    .moments.u.std);
      campaign.steps.push_back(rec);
      if (step == options.n_am) break;

      const PointList candidates = default_candidates(grid, obs);
      AcquisitionResult acq;
      pending = CampaignStep{};
      if (options.method == AcquisitionMethod::kMethod1) {
        acq = acquire_method1(obs, theta, candidates);
      } else {
        acq = acquire_method2(obs, theta, model, problem, options.ensemble_size,
                              derive_seed(options.seed, kLabelEnsemble + step), candidates, options.threads);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Index i = 0; i < acq.criterion.size(); ++i) {
          const double j = acq.criterion[i];
          if (std::isnan(j)) continue;
          lo = std::min(lo, j);
          hi = std::max(hi, j);
        }
        pending.j_min = lo;
        pending.j_max = hi;
        pending.j_bound = acq.objective_bound;
        const double slack = 1e-12 * std::max(acq.objective_bound, 1e-300);
        if (lo < -slack || hi > acq.objective_bound + slack) campaign.bound_holds = false;
      }
      if (options.keep_criteria) campaign.criteria.push_back(acq.criterion);

      double value = grid.interpolate(g_ref, acq.location);
      if (theta.sigma_eps > 0.0) {
        NormalStream noise(derive_seed(options.seed, kLabelNoise), static_cast<std::uint64_t>(step));
        value += theta.sigma_eps * noise.normal();
      }
      pending.location = acq.location;
      pending.value = value;
      obs = obs.with(acq.location, value);
    }
  } catch (const std::exception& e) {
    campaign.error = e.what();
  }
  return campaign;
}

}  // namespace condkl
