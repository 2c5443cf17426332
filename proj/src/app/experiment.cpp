#include "condkl/app/experiment.hpp"

#include <algorithm>

#include "condkl/error.hpp"
#include "condkl/random.hpp"
#include "condkl/sparse_grid.hpp"

namespace condkl::app {

StructuredGrid make_grid(const ExperimentConfig& cfg) { return StructuredGrid(cfg.lx, cfg.ly, cfg.nx, cfg.ny); }

DiffusionProblem make_problem(const ExperimentConfig& cfg) {
  DiffusionProblem p;
  p.grid = make_grid(cfg);
  return p;
}

Synthesis synthesize(const ExperimentConfig& cfg) {
  Synthesis s{make_grid(cfg), Vector::Zero(cfg.nx * cfg.ny), ObservationSet({{0.0, 0.0}}, Vector::Zero(1))};
  if (cfg.kernel.sigma > 0.0) {
    const KLBasis head = prior_head_basis(s.grid, cfg.kernel);
    Vector xi(head.dim());
    NormalStream(cfg.reference_seed_value(), 0).fill(xi);
    s.g_ref = evaluate_field(head, xi);
  }
  NormalStream sites(cfg.observation_seed_value(), 0);
  NormalStream noise(cfg.observation_seed_value(), 1);
  PointList pts;
  Vector vals(cfg.n_obs);
  for (int i = 0; i < cfg.n_obs; ++i) {
    const Point p{cfg.lx * sites.uniform(), cfg.ly * sites.uniform()};
    pts.push_back(p);
    vals[i] = s.grid.interpolate(s.g_ref, p);
    if (cfg.kernel.sigma_eps > 0.0) vals[i] += cfg.kernel.sigma_eps * noise.normal();
  }
  s.obs = ObservationSet(std::move(pts), std::move(vals));
  return s;
}

FitResult fit_kernel(const ExperimentConfig& cfg, const ObservationSet& obs) {
  FitOptions opt;
  opt.seed = cfg.fit_seed();
  opt.default_starts = cfg.fit_starts;
  const auto init =
      default_initial_guesses(obs, cfg.fit_starts, cfg.fit_seed(), cfg.kernel.convention, cfg.kernel.sigma_eps);
  return fit_hyperparameters(obs, init, opt);
}

KernelHyperparams resolve_kernel(const ExperimentConfig& cfg, const ObservationSet& obs,
                                 std::optional<FitResult>* fit) {
  if (!cfg.fit_kernel) {
    cfg.kernel.validate();
    return cfg.kernel;
  }
  FitResult r = fit_kernel(cfg, obs);
  if (fit) *fit = r;
  return r.theta;
}

namespace {

// Conditional eigenpairs covering either `want` modes or the retained fraction.
KLBasis conditional_for(const ObservationSet& obs, const KernelHyperparams& theta, const KLBasis& head,
                        Index want, double fraction, Index* chosen) {
  Index d_max = std::min<Index>(head.dim(), std::max<Index>(want, 256));
  for (;;) {
    KLBasis cond = conditional_basis(obs, theta, head, d_max);
    if (want > 0) {
      *chosen = std::min(want, cond.dim());
      return cond;
    }
    try {
      *chosen = truncate_by_variance(cond.eigenvalues, fraction, cond.total_variance);
      return cond;
    } catch (const InvalidArgument&) {
      if (d_max == head.dim()) throw;
      d_max = std::min(head.dim(), 4 * d_max);
    }
  }
}

}  // namespace

Models build_models(const ExperimentConfig& cfg, const KernelHyperparams& theta, const ObservationSet& obs,
                    bool approach1, bool approach2) {
  const StructuredGrid grid = make_grid(cfg);
  obs.check_inside(cfg.lx, cfg.ly);
  Models m;
  m.head = prior_head_basis(grid, theta);
  m.d = cfg.d > 0 ? std::min<Index>(cfg.d, m.head.dim())
                  : truncate_by_variance(m.head.eigenvalues, cfg.fraction, m.head.total_variance);
  m.unconditional = model_from_basis(m.head.truncated(m.d));
  if (approach1) {
    Index d_c = 0;
    m.conditional = conditional_for(obs, theta, m.head, cfg.d_c, cfg.fraction, &d_c);
    m.approach1 = truncate_conditional_basis(*m.conditional, d_c);
  }
  if (approach2) m.approach2 = truncate_then_condition(obs, theta, m.head.truncated(m.d));
  return m;
}

Propagation propagate(const ExperimentConfig& cfg, const ConditionalKLModel& model, int threads) {
  const DiffusionProblem problem = make_problem(cfg);
  Propagation out;
  if (cfg.propagation != PropagationMethod::kCollocation) {
    MonteCarloOptions opt;
    opt.threads = threads;
    opt.checkpoints.assign(cfg.checkpoints.begin(), cfg.checkpoints.end());
    out.mc = monte_carlo_moments(model, problem, cfg.mc_samples, cfg.mc_seed(), opt);
  }
  if (cfg.propagation != PropagationMethod::kMonteCarlo) {
    const SparseGridRule rule = smolyak_grid(static_cast<int>(model.r()), cfg.level);
    out.collocation = collocation_moments(model, problem, rule, threads);
  }
  return out;
}

Comparison compare_approaches(const ExperimentConfig& cfg, const KernelHyperparams& theta,
                              const ObservationSet& obs, int threads) {
  const StructuredGrid grid = make_grid(cfg);
  const DiffusionProblem problem = make_problem(cfg);
  Comparison c;

  ExperimentConfig ref_cfg = cfg;
  ref_cfg.d_c = 0;
  const Models models = build_models(ref_cfg, theta, obs, true, true);
  c.d = models.d;
  c.d_c_reference = models.approach1->r();
  c.r = cfg.compare_r > 0 ? cfg.compare_r : models.approach2->r();

  MonteCarloOptions mc;
  mc.threads = threads;
  c.reference.g = implied_moment_field(*models.approach1);
  c.reference.u = monte_carlo_moments(*models.approach1, problem, cfg.mc_samples, cfg.mc_seed(), mc).moments.u;

  ConditionalKLModel a1 = truncate_conditional_basis(*models.conditional, std::min(c.r, models.conditional->dim()));
  ConditionalKLModel a2 = *models.approach2;
  if (a2.r() != c.r) {
    // Explicit comparison rank: take the leading r directions of M^d.
    if (c.r > a2.r()) throw InvalidArgument("compare_r exceeds the Approach 2 rank");
    a2.modes = a2.modes.leftCols(c.r).eval();
    a2.spectrum = a2.spectrum.head(c.r).eval();
  }

  const SparseGridRule rule = smolyak_grid(static_cast<int>(c.r), cfg.level);
  c.collocation_nodes = rule.size();
  auto run = [&](const ConditionalKLModel& m, MomentPair& out, ApproachError& err) {
    const CollocationResult res = collocation_moments(m, problem, rule, threads);
    c.clipped += res.clipped_u;
    out.g = implied_moment_field(m);
    out.u = res.moments.u;
    err.mean_g = field_l2_norm(grid, out.g.mean - c.reference.g.mean);
    err.std_g = field_l2_norm(grid, out.g.std - c.reference.g.std);
    err.mean_u = field_l2_norm(grid, out.u.mean - c.reference.u.mean);
    err.std_u = field_l2_norm(grid, out.u.std - c.reference.u.std);
  };
  run(a1, c.approach1, c.error1);
  run(a2, c.approach2, c.error2);
  return c;
}

std::vector<Campaign> learn(const ExperimentConfig& cfg, const KernelHyperparams& theta, const Synthesis& syn,
                            int threads) {
  const DiffusionProblem problem = make_problem(cfg);
  std::vector<Campaign> out;
  for (AcquisitionMethod method : cfg.learn_methods) {
    CampaignOptions opt;
    opt.method = method;
    opt.n_am = cfg.n_am;
    opt.mc_samples = cfg.learn_samples;
    opt.ensemble_size = cfg.ensemble;
    opt.retained_fraction = cfg.fraction;
    opt.seed = cfg.learn_seed();
    opt.threads = threads;
    out.push_back(run_campaign(syn.g_ref, syn.obs, theta, problem, opt));
  }
  return out;
}

}  // namespace condkl::app
