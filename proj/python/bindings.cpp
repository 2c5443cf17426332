#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "condkl/active_learning.hpp"
#include "condkl/app/commands.hpp"
#include "condkl/conditioning.hpp"
#include "condkl/error.hpp"
#include "condkl/kernel_gp.hpp"
#include "condkl/kl_expansion.hpp"
#include "condkl/pde_solver.hpp"
#include "condkl/sparse_grid.hpp"
#include "condkl/uq_propagation.hpp"

namespace py = pybind11;
using namespace condkl;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

PointList to_points(const PointArray& a) {
  PointList out(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = {a(i, 0), a(i, 1)};
  return out;
}

PointArray from_points(const PointList& p) {
  PointArray a(static_cast<Index>(p.size()), 2);
  for (std::size_t i = 0; i < p.size(); ++i) a.row(static_cast<Index>(i)) << p[i].x1, p[i].x2;
  return a;
}

py::dict moments(const MomentField& m) {
  py::dict d;
  d["mean"] = m.mean;
  d["std"] = m.std;
  return d;
}

py::dict moment_pair(const MomentPair& m) {
  py::dict d;
  d["g"] = moments(m.g);
  d["u"] = moments(m.u);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "condkl C++ core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IllConditioned>(m, "IllConditioned", PyExc_RuntimeError);
  py::register_exception<SolverFailure>(m, "SolverFailure", PyExc_RuntimeError);
  py::register_exception<FullyDetermined>(m, "FullyDetermined", PyExc_RuntimeError);

  py::enum_<LengthScaleConvention>(m, "LengthScaleConvention")
      .value("plain", LengthScaleConvention::kPlain)
      .value("rbf", LengthScaleConvention::kRbf);

  py::class_<KernelHyperparams>(m, "KernelHyperparams")
      .def(py::init([](double sigma, double l1, double l2, double sigma_eps, LengthScaleConvention conv) {
             KernelHyperparams t{sigma, l1, l2, sigma_eps, conv};
             t.validate();
             return t;
           }),
           py::arg("sigma"), py::arg("l1"), py::arg("l2"), py::arg("sigma_eps") = 0.0,
           py::arg("convention") = LengthScaleConvention::kPlain)
      .def_readwrite("sigma", &KernelHyperparams::sigma)
      .def_readwrite("l1", &KernelHyperparams::l1)
      .def_readwrite("l2", &KernelHyperparams::l2)
      .def_readwrite("sigma_eps", &KernelHyperparams::sigma_eps)
      .def_readwrite("convention", &KernelHyperparams::convention)
      .def("__repr__", [](const KernelHyperparams& t) {
        std::ostringstream s;
        s << "KernelHyperparams(sigma=" << t.sigma << ", l1=" << t.l1 << ", l2=" << t.l2
          << ", sigma_eps=" << t.sigma_eps << ", convention=" << to_string(t.convention) << ")";
        return s.str();
      });

  py::class_<StructuredGrid>(m, "StructuredGrid")
      .def(py::init<double, double, int, int>(), py::arg("lx"), py::arg("ly"), py::arg("nx"), py::arg("ny"))
      .def_property_readonly("nx", &StructuredGrid::nx)
      .def_property_readonly("ny", &StructuredGrid::ny)
      .def_property_readonly("lx", &StructuredGrid::lx)
      .def_property_readonly("ly", &StructuredGrid::ly)
      .def_property_readonly("size", &StructuredGrid::size)
      .def_property_readonly("weights", &StructuredGrid::weights)
      .def("nodes", [](const StructuredGrid& g) { return from_points(g.nodes()); })
      .def("interpolate",
           [](const StructuredGrid& g, const Vector& f, const PointArray& p) {
             const PointList pts = to_points(p);
             Vector out(static_cast<Index>(pts.size()));
             for (std::size_t i = 0; i < pts.size(); ++i) out[static_cast<Index>(i)] = g.interpolate(f, pts[i]);
             return out;
           });

  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init([](const PointArray& loc, const Vector& y) { return ObservationSet(to_points(loc), y); }),
           py::arg("locations"), py::arg("values"))
      .def_property_readonly("size", &ObservationSet::size)
      .def_property_readonly("locations", [](const ObservationSet& o) { return from_points(o.locations()); })
      .def_property_readonly("values", &ObservationSet::values);

  m.def("kernel_eval",
        [](std::pair<double, double> x, std::pair<double, double> y, const KernelHyperparams& t) {
          return kernel_eval({x.first, x.second}, {y.first, y.second}, t);
        });
  m.def("cov_matrix", [](const PointArray& a, const PointArray& b, const KernelHyperparams& t) {
    return cov_matrix(to_points(a), to_points(b), t);
  });
  m.def("log_marginal_likelihood", &log_marginal_likelihood);
  m.def("gp_posterior", [](const ObservationSet& o, const KernelHyperparams& t, const PointArray& q) {
    const GpPosterior p = gp_posterior(o, t, to_points(q));
    return py::make_tuple(p.mean, p.cov);
  });
  m.def(
      "fit_hyperparameters",
      [](const ObservationSet& o, int starts, std::uint64_t seed, LengthScaleConvention conv) {
        FitOptions opt;
        opt.seed = seed;
        const FitResult r = fit_hyperparameters(o, default_initial_guesses(o, starts, seed, conv), opt);
        return py::make_tuple(r.theta, r.lml);
      },
      py::arg("obs"), py::arg("starts") = 8, py::arg("seed") = 0, py::arg("convention") = LengthScaleConvention::kPlain);

  py::class_<KLBasis>(m, "KLBasis")
      .def_readonly("grid", &KLBasis::grid)
      .def_readonly("mean", &KLBasis::mean)
      .def_readonly("eigenvalues", &KLBasis::eigenvalues)
      .def_readonly("eigenfunctions", &KLBasis::eigenfunctions)
      .def_readonly("total_variance", &KLBasis::total_variance)
      .def_property_readonly("dim", &KLBasis::dim)
      .def("truncated", &KLBasis::truncated);
  m.def("solve_separable_se_eigenproblem", &solve_separable_se_eigenproblem);
  m.def("solve_covariance_eigenproblem", &solve_covariance_eigenproblem);
  m.def(
      "truncate_by_variance",
      [](const Vector& ev, double fraction, std::optional<double> total) {
        return total ? truncate_by_variance(ev, fraction, *total) : truncate_by_variance(ev, fraction);
      },
      py::arg("eigenvalues"), py::arg("fraction"), py::arg("total") = py::none());

  py::enum_<Provenance>(m, "Provenance")
      .value("unconditional", Provenance::kUnconditional)
      .value("approach1", Provenance::kApproach1)
      .value("approach2", Provenance::kApproach2);

  py::class_<ConditionalKLModel>(m, "ConditionalKLModel")
      .def_readonly("grid", &ConditionalKLModel::grid)
      .def_readonly("mean", &ConditionalKLModel::mean)
      .def_readonly("modes", &ConditionalKLModel::modes)
      .def_readonly("provenance", &ConditionalKLModel::provenance)
      .def_readonly("spectrum", &ConditionalKLModel::spectrum)
      .def_property_readonly("r", &ConditionalKLModel::r)
      .def("realize", &ConditionalKLModel::realize);
  m.def("model_from_basis", &model_from_basis, py::arg("basis"), py::arg("provenance") = Provenance::kUnconditional);
  m.def(
      "condition_then_truncate",
      [](const ObservationSet& o, const KernelHyperparams& t, const StructuredGrid& g, Index d_c, bool dense) {
        Approach1Options opt;
        if (dense) opt.solver = ConditionalEigenSolver::kDense;
        return condition_then_truncate(o, t, g, d_c, opt);
      },
      py::arg("obs"), py::arg("theta"), py::arg("grid"), py::arg("d_c"), py::arg("dense") = false);
  m.def("truncate_then_condition",
        py::overload_cast<const ObservationSet&, const KernelHyperparams&, const StructuredGrid&, Index>(
            &truncate_then_condition));
  m.def("condition_xi", [](const ObservationSet& o, const KernelHyperparams& t, const KLBasis& b) {
    const ConditionedVariables cv = condition_xi(o, t, b);
    py::dict d;
    d["mu"] = cv.mu;
    d["m"] = cv.m;
    d["rank"] = cv.rank;
    d["m_eigenvalues"] = cv.m_eigenvalues;
    return d;
  });
  m.def("implied_moment_field", [](const ConditionalKLModel& mdl) { return moments(implied_moment_field(mdl)); });

  py::class_<DiffusionProblem>(m, "DiffusionProblem")
      .def(py::init([](const StructuredGrid& g, double left, double right) {
             DiffusionProblem p;
             p.grid = g;
             p.dirichlet_left = left;
             p.dirichlet_right = right;
             return p;
           }),
           py::arg("grid"), py::arg("dirichlet_left") = 1.0, py::arg("dirichlet_right") = 0.0)
      .def_readwrite("source", &DiffusionProblem::source);
  m.def("solve_diffusion", [](const DiffusionProblem& p, const Vector& k) { return solve_diffusion(p, k).values; });

  py::class_<SparseGridRule>(m, "SparseGridRule")
      .def_readonly("dim", &SparseGridRule::dim)
      .def_readonly("level", &SparseGridRule::level)
      .def_readonly("nodes", &SparseGridRule::nodes)
      .def_readonly("weights", &SparseGridRule::weights)
      .def_property_readonly("size", &SparseGridRule::size);
  m.def("smolyak_grid", &smolyak_grid, py::arg("dim"), py::arg("level"));
  m.def("gauss_hermite", [](int n) {
    const QuadratureRule r = gauss_hermite(n);
    return py::make_tuple(r.nodes, r.weights);
  });
  m.def("field_l2_norm", &field_l2_norm);
  m.def(
      "monte_carlo_moments",
      [](const ConditionalKLModel& mdl, const DiffusionProblem& p, Index n, std::uint64_t seed, int threads) {
        MonteCarloOptions opt;
        opt.threads = threads;
        MonteCarloResult r;
        {
          py::gil_scoped_release release;
          r = monte_carlo_moments(mdl, p, n, seed, opt);
        }
        return moment_pair(r.moments);
      },
      py::arg("model"), py::arg("problem"), py::arg("n"), py::arg("seed"), py::arg("threads") = 1);
  m.def(
      "collocation_moments",
      [](const ConditionalKLModel& mdl, const DiffusionProblem& p, const SparseGridRule& rule, int threads) {
        const CollocationResult r = collocation_moments(mdl, p, rule, threads);
        py::dict d = moment_pair(r.moments);
        d["nodes_solved"] = r.nodes_solved;
        d["clipped_u"] = r.clipped_u;
        return d;
      },
      py::arg("model"), py::arg("problem"), py::arg("rule"), py::arg("threads") = 1);

  py::enum_<AcquisitionMethod>(m, "AcquisitionMethod")
      .value("method1", AcquisitionMethod::kMethod1)
      .value("method2", AcquisitionMethod::kMethod2);
  m.def("acquire_method1", [](const ObservationSet& o, const KernelHyperparams& t, const PointArray& cand) {
    const AcquisitionResult r = acquire_method1(o, t, to_points(cand));
    return py::make_tuple(r.candidate, r.criterion);
  });
  m.def(
      "acquire_method2",
      [](const ObservationSet& o, const KernelHyperparams& t, const ConditionalKLModel& mdl,
         const DiffusionProblem& p, Index ensemble, std::uint64_t seed, const PointArray& cand) {
        const AcquisitionResult r = acquire_method2(o, t, mdl, p, ensemble, seed, to_points(cand));
        return py::make_tuple(r.candidate, r.criterion, r.objective_bound);
      },
      py::arg("obs"), py::arg("theta"), py::arg("model"), py::arg("problem"), py::arg("ensemble") = 200,
      py::arg("seed") = 0, py::arg("candidates"));
  m.def(
      "run_campaign",
      [](const Vector& g_ref, const ObservationSet& o, const KernelHyperparams& t, const DiffusionProblem& p,
         AcquisitionMethod method, int n_am, Index mc_samples, Index ensemble, std::uint64_t seed) {
        CampaignOptions opt;
        opt.method = method;
        opt.n_am = n_am;
        opt.mc_samples = mc_samples;
        opt.ensemble_size = ensemble;
        opt.seed = seed;
        const Campaign c = run_campaign(g_ref, o, t, p, opt);
        if (c.error) throw Error(*c.error);
        py::list steps;
        for (const auto& s : c.steps) {
          py::dict d;
          d["step"] = s.step;
          d["x1"] = s.location.x1;
          d["x2"] = s.location.x2;
          d["norm_g"] = s.norm_g;
          d["norm_u"] = s.norm_u;
          d["d_c"] = s.d_c;
          steps.append(d);
        }
        return steps;
      },
      py::arg("g_ref"), py::arg("obs"), py::arg("theta"), py::arg("problem"), py::arg("method"), py::arg("n_am"),
      py::arg("mc_samples") = 1000, py::arg("ensemble") = 200, py::arg("seed") = 0);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config, std::optional<std::string> out,
         std::optional<std::uint64_t> seed, int threads) {
        app::CommandOptions opt{command, config, out, seed, threads};
        std::ostringstream log;
        const int code = app::run_command(opt, log);
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = 1);
}
