#include "condkl/pde_solver.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "condkl/error.hpp"

namespace condkl {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

double left_value(const DiffusionProblem& p, int iy) {
  return p.left_profile.size() ? p.left_profile[iy] : p.dirichlet_left;
}

double right_value(const DiffusionProblem& p, int iy) {
  return p.right_profile.size() ? p.right_profile[iy] : p.dirichlet_right;
}

void check_k(const DiffusionProblem& p, const Vector& k) {
  if (k.size() != p.grid.size()) throw InvalidArgument("k field does not match the grid");
  for (Index i = 0; i < k.size(); ++i)
    if (!(k[i] > 0.0) || !std::isfinite(k[i]))
      throw InvalidArgument("k must be finite and strictly positive (node " + std::to_string(i) + ")");
}

}  // namespace

void DiffusionProblem::validate() const {
  const auto check = [](const Vector& v, Index n, const char* name) {
    if (v.size() != 0 && v.size() != n)
      throw InvalidArgument(std::string("DiffusionProblem: ") + name + " has the wrong size");
  };
  check(source, grid.size(), "source");
  check(left_profile, grid.ny(), "left_profile");
  check(right_profile, grid.ny(), "right_profile");
  check(bottom_flux, grid.nx(), "bottom_flux");
  check(top_flux, grid.nx(), "top_flux");
}

LinearSystem assemble_diffusion(const DiffusionProblem& p, const Vector& k) {
  p.validate();
  check_k(p, k);
  const StructuredGrid& g = p.grid;
  const int nx = g.nx();
  const int ny = g.ny();
  const double tx = g.hy() / g.hx();  // face length over centre distance
  const double ty = g.hx() / g.hy();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * g.size()));
  Vector rhs = Vector::Zero(g.size());
  if (p.source.size()) rhs = p.source * g.cell_area();

  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Index i = g.index(ix, iy);
      double diag = 0.0;
      auto link = [&](Index j, double t) {
        diag += t;
        trip.emplace_back(i, j, -t);
      };
      if (ix > 0) link(g.index(ix - 1, iy), tx * harmonic(k[i], k[g.index(ix - 1, iy)]));
      if (ix + 1 < nx) link(g.index(ix + 1, iy), tx * harmonic(k[i], k[g.index(ix + 1, iy)]));
      if (iy > 0) link(g.index(ix, iy - 1), ty * harmonic(k[i], k[g.index(ix, iy - 1)]));
      if (iy + 1 < ny) link(g.index(ix, iy + 1), ty * harmonic(k[i], k[g.index(ix, iy + 1)]));
      if (ix == 0) {
        const double t = 2.0 * tx * k[i];
        diag += t;
        rhs[i] += t * left_value(p, iy);
      }
      if (ix == nx - 1) {
        const double t = 2.0 * tx * k[i];
        diag += t;
        rhs[i] += t * right_value(p, iy);
      }
      if (iy == 0 && p.bottom_flux.size()) rhs[i] += p.bottom_flux[ix] * g.hx();
      if (iy == ny - 1 && p.top_flux.size()) rhs[i] += p.top_flux[ix] * g.hx();
      trip.emplace_back(i, i, diag);
    }
  }
  LinearSystem sys;
  sys.matrix.resize(g.size(), g.size());
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.rhs = std::move(rhs);
  return sys;
}

DiffusionSolver::DiffusionSolver(DiffusionProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
}

SolutionField DiffusionSolver::solve(const Vector& k) {
  const LinearSystem sys = assemble_diffusion(problem_, k);
  if (!analysed_) {
    ldlt_.analyzePattern(sys.matrix);
    analysed_ = true;
  }
  ldlt_.factorize(sys.matrix);
  if (ldlt_.info() != Eigen::Success) throw SolverFailure("sparse LDLT factorisation failed", NAN);
  SolutionField out{ldlt_.solve(sys.rhs)};
  const double bnorm = sys.rhs.norm();
  const double rnorm = (sys.matrix * out.values - sys.rhs).norm();
  const double rel = bnorm > 0.0 ? rnorm / bnorm : rnorm;
  if (!(rel <= kResidualTolerance))
    throw SolverFailure("diffusion solve residual " + std::to_string(rel) + " above tolerance", rel);
  return out;
}

SolutionField solve_diffusion(const DiffusionProblem& problem, const Vector& k) {
  DiffusionSolver solver(problem);
  return solver.solve(k);
}

double horizontal_flux(const DiffusionProblem& p, const Vector& k, const Vector& u, int face) {
  const StructuredGrid& g = p.grid;
  if (face < 0 || face > g.nx()) throw InvalidArgument("horizontal_flux: face out of range");
  const double tx = g.hy() / g.hx();
  double total = 0.0;
  for (int iy = 0; iy < g.ny(); ++iy) {
    if (face == 0) {
      const Index i = g.index(0, iy);
      total += 2.0 * tx * k[i] * (left_value(p, iy) - u[i]);
    } else if (face == g.nx()) {
      const Index i = g.index(g.nx() - 1, iy);
      total += 2.0 * tx * k[i] * (u[i] - right_value(p, iy));
    } else {
      const Index a = g.index(face - 1, iy);
      const Index b = g.index(face, iy);
      total += tx * harmonic(k[a], k[b]) * (u[a] - u[b]);
    }
  }
  return total;
}

}  // namespace condkl
