#include "condkl/uq_propagation.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "condkl/error.hpp"
#include "condkl/random.hpp"
#include "detail/parallel.hpp"

namespace condkl {

double field_l2_norm(const StructuredGrid& grid, const Vector& field) {
  if (field.size() != grid.size()) throw InvalidArgument("field_l2_norm: field does not match the grid");
  return std::sqrt(grid.weights().dot(field.cwiseAbs2()));
}

namespace {

// Realisations are processed in blocks: solved in parallel into index-keyed
// slots, then folded into the accumulators in index order.
constexpr Index kBlock = 64;

class SolverPool {
 public:
  SolverPool(const DiffusionProblem& problem, int threads) {
    for (int i = 0; i < std::max(threads, 1); ++i) solvers_.push_back(std::make_unique<DiffusionSolver>(problem));
  }
  DiffusionSolver& operator[](int w) { return *solvers_[static_cast<std::size_t>(w)]; }

 private:
  std::vector<std::unique_ptr<DiffusionSolver>> solvers_;
};

Vector solve_realisation(DiffusionSolver& solver, const Vector& g, const char* what, Index index) {
  try {
    return solver.solve(g.array().exp().matrix()).values;
  } catch (const SolverFailure& e) {
    throw SolverFailure(std::string(what) + " " + std::to_string(index) + ": " + e.what(), e.residual());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(what) + " " + std::to_string(index) + ": " + e.what());
  }
}

struct Welford {
  Index n = 0;
  Vector mean;
  Vector m2;

  explicit Welford(Index size) : mean(Vector::Zero(size)), m2(Vector::Zero(size)) {}

  void add(const Vector& x) {
    ++n;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta.cwiseProduct(x - mean);
  }

  MomentField moments() const {
    MomentField out;
    out.mean = mean;
    out.std = Vector::Zero(mean.size());
    if (n > 1) out.std = (m2.cwiseMax(0.0) / static_cast<double>(n - 1)).cwiseSqrt();
    return out;
  }
};

void check_model(const ConditionalKLModel& model, const DiffusionProblem& problem) {
  if (!(model.grid == problem.grid)) throw InvalidArgument("model and problem grids differ");
  if (model.mean.size() != problem.grid.size() || model.modes.rows() != problem.grid.size())
    throw InvalidArgument("model fields do not match the grid");
}

}  // namespace

MonteCarloResult monte_carlo_moments(const ConditionalKLModel& model, const DiffusionProblem& problem,
                                     Index n, std::uint64_t seed, const MonteCarloOptions& options) {
  if (n < 2) throw InvalidArgument("monte_carlo_moments: n must be >= 2");
  check_model(model, problem);
  const Index size = problem.grid.size();
  const int threads = std::max(options.threads, 1);
  SolverPool solvers(problem, threads);
  Welford acc_g(size), acc_u(size);
  MonteCarloResult result;
  auto next_checkpoint = options.checkpoints.begin();

  Matrix g_block(size, kBlock), u_block(size, kBlock);
  for (Index start = 0; start < n; start += kBlock) {
    const Index count = std::min(kBlock, n - start);
    detail::parallel_for(0, count, threads, [&](Index b, int w) {
      const Index j = start + b;
      Vector zeta(model.r());
      NormalStream stream(seed, static_cast<std::uint64_t>(j));
      stream.fill(zeta);
      g_block.col(b) = model.realize(zeta);
      u_block.col(b) = solve_realisation(solvers[w], g_block.col(b), "realization", j);
    });
    for (Index b = 0; b < count; ++b) {
      acc_g.add(g_block.col(b));
      acc_u.add(u_block.col(b));
      while (next_checkpoint != options.checkpoints.end() && *next_checkpoint <= acc_g.n) {
        if (*next_checkpoint == acc_g.n && acc_g.n >= 2) {
          const MomentField mg = acc_g.moments(), mu = acc_u.moments();
          result.convergence.push_back({acc_g.n, field_l2_norm(problem.grid, mg.mean),
                                        field_l2_norm(problem.grid, mg.std), field_l2_norm(problem.grid, mu.mean),
                                        field_l2_norm(problem.grid, mu.std)});
        }
        ++next_checkpoint;
      }
    }
  }
  result.moments = {acc_g.moments(), acc_u.moments()};
  result.samples = n;
  return result;
}

MonteCarloResult monte_carlo_moments(const KLBasis& basis, const DiffusionProblem& problem, Index n,
                                     std::uint64_t seed, const MonteCarloOptions& options) {
  return monte_carlo_moments(model_from_basis(basis), problem, n, seed, options);
}

CollocationResult collocation_moments(const ConditionalKLModel& model, const DiffusionProblem& problem,
                                      const SparseGridRule& rule, int threads) {
  check_model(model, problem);
  if (rule.dim != model.r())
    throw InvalidArgument("collocation_moments: rule dimension " + std::to_string(rule.dim) +
                          " differs from model dimension " + std::to_string(model.r()));
  const Index size = problem.grid.size();
  threads = std::max(threads, 1);
  SolverPool solvers(problem, threads);
  Vector s1_g = Vector::Zero(size), s2_g = Vector::Zero(size);
  Vector s1_u = Vector::Zero(size), s2_u = Vector::Zero(size);

  Matrix g_block(size, kBlock), u_block(size, kBlock);
  for (Index start = 0; start < rule.size(); start += kBlock) {
    const Index count = std::min(kBlock, rule.size() - start);
    detail::parallel_for(0, count, threads, [&](Index b, int w) {
      const Index j = start + b;
      g_block.col(b) = model.realize(rule.nodes.row(j).transpose());
      u_block.col(b) = solve_realisation(solvers[w], g_block.col(b), "collocation node", j);
    });
    for (Index b = 0; b < count; ++b) {
      const double w = rule.weights[start + b];
      s1_g += w * g_block.col(b);
      s2_g += w * g_block.col(b).cwiseAbs2();
      s1_u += w * u_block.col(b);
      s2_u += w * u_block.col(b).cwiseAbs2();
    }
  }

  CollocationResult out;
  out.nodes_solved = rule.size();
  auto finish = [](const Vector& s1, const Vector& s2, Index& clipped) {
    MomentField m;
    m.mean = s1;
    Vector var = s2 - s1.cwiseAbs2();
    clipped = (var.array() < 0.0).count();
    m.std = var.cwiseMax(0.0).cwiseSqrt();
    return m;
  };
  out.moments.g = finish(s1_g, s2_g, out.clipped_g);
  out.moments.u = finish(s1_u, s2_u, out.clipped_u);
  return out;
}

Ensemble draw_ensemble(const ConditionalKLModel& model, const DiffusionProblem& problem, Index m,
                       std::uint64_t seed, int threads) {
  if (m < 1) throw InvalidArgument("draw_ensemble: m must be >= 1");
  check_model(model, problem);
  threads = std::max(threads, 1);
  SolverPool solvers(problem, threads);
  Ensemble e{Matrix(problem.grid.size(), m), Matrix(problem.grid.size(), m)};
  detail::parallel_for(0, m, threads, [&](Index j, int w) {
    Vector zeta(model.r());
    NormalStream stream(seed, static_cast<std::uint64_t>(j));
    stream.fill(zeta);
    e.g.col(j) = model.realize(zeta);
    e.u.col(j) = solve_realisation(solvers[w], e.g.col(j), "realization", j);
  });
  return e;
}

}  // namespace condkl
