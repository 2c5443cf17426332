#include "condkl/kernel_gp.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "condkl/error.hpp"
#include "condkl/random.hpp"

namespace condkl {

std::string_view to_string(LengthScaleConvention c) {
  return c == LengthScaleConvention::kRbf ? "rbf" : "plain";
}

std::optional<LengthScaleConvention> parse_convention(std::string_view s) {
  if (s == "plain") return LengthScaleConvention::kPlain;
  if (s == "rbf") return LengthScaleConvention::kRbf;
  return std::nullopt;
}

void KernelHyperparams::validate() const {
  if (!(sigma > 0.0) || !(l1 > 0.0) || !(l2 > 0.0) || !(sigma_eps >= 0.0) ||
      !std::isfinite(sigma) || !std::isfinite(l1) || !std::isfinite(l2) ||
      !std::isfinite(sigma_eps))
    throw InvalidArgument("kernel hyperparameters require sigma, l1, l2 > 0 and sigma_eps >= 0");
}

ObservationSet::ObservationSet(PointList locations, Vector values)
    : locations_(std::move(locations)), values_(std::move(values)) {
  if (locations_.empty()) throw InvalidArgument("observation set must not be empty");
  if (static_cast<Index>(locations_.size()) != values_.size())
    throw InvalidArgument("observation set: location and value counts differ");
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    if (!std::isfinite(locations_[i].x1) || !std::isfinite(locations_[i].x2) ||
        !std::isfinite(values_[static_cast<Index>(i)]))
      throw InvalidArgument("observation set: non-finite entry");
    for (std::size_t j = 0; j < i; ++j) {
      if (locations_[i].x1 == locations_[j].x1 && locations_[i].x2 == locations_[j].x2)
        throw InvalidArgument("observation set: duplicate location");
    }
  }
}

ObservationSet ObservationSet::with(const Point& location, double value) const {
  PointList locs = locations_;
  locs.push_back(location);
  Vector vals(values_.size() + 1);
  vals << values_, value;
  return ObservationSet(std::move(locs), std::move(vals));
}

void ObservationSet::check_inside(double lx, double ly) const {
  for (const auto& p : locations_) {
    if (p.x1 < 0.0 || p.x1 > lx || p.x2 < 0.0 || p.x2 > ly)
      throw InvalidArgument("observation location outside the domain");
  }
}

namespace {

struct InverseScales {
  double a1;
  double a2;
};

InverseScales inverse_scales(const KernelHyperparams& theta) {
  const double f = theta.convention == LengthScaleConvention::kRbf ? 0.5 : 1.0;
  return {f / (theta.l1 * theta.l1), f / (theta.l2 * theta.l2)};
}

}  // namespace

double kernel_eval(const Point& x, const Point& x_prime, const KernelHyperparams& theta) {
  const auto s = inverse_scales(theta);
  const double d1 = x.x1 - x_prime.x1;
  const double d2 = x.x2 - x_prime.x2;
  return theta.variance() * std::exp(-d1 * d1 * s.a1 - d2 * d2 * s.a2);
}

Matrix cov_matrix(const PointList& a, const PointList& b, const KernelHyperparams& theta) {
  if (a.empty() || b.empty()) throw InvalidArgument("cov_matrix: empty point list");
  theta.validate();
  const auto s = inverse_scales(theta);
  const double var = theta.variance();
  const Index na = static_cast<Index>(a.size());
  const Index nb = static_cast<Index>(b.size());
  Matrix c(na, nb);
  for (Index j = 0; j < nb; ++j) {
    const Point& q = b[static_cast<std::size_t>(j)];
    for (Index i = 0; i < na; ++i) {
      const Point& p = a[static_cast<std::size_t>(i)];
      const double d1 = p.x1 - q.x1;
      const double d2 = p.x2 - q.x2;
      c(i, j) = var * std::exp(-d1 * d1 * s.a1 - d2 * d2 * s.a2);
    }
  }
  return c;
}

namespace {

Matrix noisy_gram(const ObservationSet& obs, const KernelHyperparams& theta) {
  Matrix k = cov_matrix(obs.locations(), obs.locations(), theta);
  k.diagonal().array() += theta.sigma_eps * theta.sigma_eps;
  return k;
}

}  // namespace

double log_marginal_likelihood(const ObservationSet& obs, const KernelHyperparams& theta) {
  theta.validate();
  const auto f = factor_with_jitter(noisy_gram(obs, theta), theta.variance());
  const Matrix& l = f.llt.matrixLLT();
  const Vector w = f.llt.matrixL().solve(obs.values());
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double n = static_cast<double>(obs.size());
  return -0.5 * w.squaredNorm() - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpRegression::GpRegression(const ObservationSet& obs, const KernelHyperparams& theta)
    : obs_(obs), theta_(theta) {
  theta_.validate();
  factor_ = factor_with_jitter(noisy_gram(obs_, theta_), theta_.variance());
  alpha_ = factor_.llt.solve(obs_.values());
}

Vector GpRegression::mean(const PointList& query) const {
  return cov_matrix(query, obs_.locations(), theta_) * alpha_;
}

Matrix GpRegression::whitened_cross(const PointList& query) const {
  // L^{-1} C(X, q), returned transposed as |q| x N_s.
  Matrix kxq = cov_matrix(obs_.locations(), query, theta_);
  factor_.llt.matrixL().solveInPlace(kxq);
  return kxq.transpose();
}

Vector GpRegression::variance(const PointList& query) const {
  const Matrix b = whitened_cross(query);
  Vector v = Vector::Constant(static_cast<Index>(query.size()), theta_.variance()) -
             b.rowwise().squaredNorm();
  return v.cwiseMax(0.0);
}

Matrix GpRegression::covariance(const PointList& query) const {
  const Matrix b = whitened_cross(query);
  Matrix c = cov_matrix(query, query, theta_);
  c.noalias() -= b * b.transpose();
  // exact symmetry
  c = 0.5 * (c + c.transpose()).eval();
  return c;
}

GpPosterior gp_posterior(const ObservationSet& obs, const KernelHyperparams& theta,
                         const PointList& query) {
  if (query.empty()) throw InvalidArgument("gp_posterior: empty query");
  GpRegression gp(obs, theta);
  return {gp.mean(query), gp.covariance(query)};
}

std::vector<KernelHyperparams> default_initial_guesses(const ObservationSet& obs, int count,
                                                       std::uint64_t seed,
                                                       LengthScaleConvention convention,
                                                       double sigma_eps) {
  const Vector& y = obs.values();
  double sd = 0.0;
  if (y.size() > 1) sd = std::sqrt((y.array() - y.mean()).square().sum() / (y.size() - 1));
  if (!(sd > 0.0)) sd = 1.0;
  double min1 = std::numeric_limits<double>::max(), max1 = -min1, min2 = min1, max2 = -min1;
  for (const auto& p : obs.locations()) {
    min1 = std::min(min1, p.x1);
    max1 = std::max(max1, p.x1);
    min2 = std::min(min2, p.x2);
    max2 = std::max(max2, p.x2);
  }
  const double l1 = max1 > min1 ? (max1 - min1) / 5.0 : 1.0;
  const double l2 = max2 > min2 ? (max2 - min2) / 5.0 : 1.0;

  NormalStream stream(seed, 0x6669745fULL);
  const double lo = std::log(0.1), hi = std::log(10.0);
  auto factor = [&] { return std::exp(lo + (hi - lo) * stream.uniform()); };
  std::vector<KernelHyperparams> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    KernelHyperparams t;
    t.sigma = sd * factor();
    t.l1 = l1 * factor();
    t.l2 = l2 * factor();
    t.sigma_eps = sigma_eps;
    t.convention = convention;
    out.push_back(t);
  }
  return out;
}

namespace {

constexpr double kLogClamp = 25.0;

struct Objective {
  const ObservationSet* obs;
  KernelHyperparams base;
  bool fit_noise;
  double noise_offset;
  int evaluations = 0;

  KernelHyperparams unpack(const gsl_vector* p) const {
    KernelHyperparams t = base;
    auto ex = [](double v) { return std::exp(std::clamp(v, -kLogClamp, kLogClamp)); };
    t.sigma = ex(gsl_vector_get(p, 0));
    t.l1 = ex(gsl_vector_get(p, 1));
    t.l2 = ex(gsl_vector_get(p, 2));
    if (fit_noise) t.sigma_eps = std::max(0.0, ex(gsl_vector_get(p, 3)) - noise_offset);
    return t;
  }
};

double negative_lml(const gsl_vector* p, void* params) {
  auto* obj = static_cast<Objective*>(params);
  ++obj->evaluations;
  try {
    const double v = log_marginal_likelihood(*obj->obs, obj->unpack(p));
    return std::isfinite(v) ? -v : 1e300;
  } catch (const Error&) {
    return 1e300;
  }
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace

FitResult fit_hyperparameters(const ObservationSet& obs, const std::vector<KernelHyperparams>& init,
                              const FitOptions& options) {
  if (init.empty()) throw InvalidArgument("fit_hyperparameters: at least one initial guess required");
  if (obs.size() < 3) throw InvalidArgument("fit_hyperparameters: need at least 3 observations");
  gsl_set_error_handler_off();

  FitResult best_init;
  best_init.lml = -std::numeric_limits<double>::infinity();
  for (const auto& t : init) {
    t.validate();
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = log_marginal_likelihood(obs, t);
    } catch (const Error&) {
    }
    if (v > best_init.lml) {
      best_init.lml = v;
      best_init.theta = t;
    }
  }

  const Vector& y = obs.values();
  const double scale = std::max(y.cwiseAbs().maxCoeff(), 1e-300);

  FitResult best_opt;
  best_opt.lml = -std::numeric_limits<double>::infinity();
  const std::size_t dim = options.fit_noise ? 4 : 3;
  for (const auto& start : init) {
    Objective obj{&obs, start, options.fit_noise, 1e-8 * scale};
    std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(dim));
    std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(dim));
    gsl_vector_set(x.get(), 0, std::log(start.sigma));
    gsl_vector_set(x.get(), 1, std::log(start.l1));
    gsl_vector_set(x.get(), 2, std::log(start.l2));
    if (options.fit_noise) gsl_vector_set(x.get(), 3, std::log(start.sigma_eps + obj.noise_offset));
    gsl_vector_set_all(step.get(), 0.5);

    gsl_multimin_function fn{&negative_lml, dim, &obj};
    std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> m(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim));
    gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), step.get());
    while (obj.evaluations < options.max_evaluations) {
      if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
      const double size = gsl_multimin_fminimizer_size(m.get());
      if (gsl_multimin_test_size(size, options.simplex_tolerance) == GSL_SUCCESS) break;
    }
    const double v = -gsl_multimin_fminimizer_minimum(m.get());
    if (v > best_opt.lml && v > -1e299) {
      best_opt.lml = v;
      best_opt.theta = obj.unpack(gsl_multimin_fminimizer_x(m.get()));
    }
  }

  const double noise = 1e-9 * (1.0 + std::abs(best_init.lml));
  if (std::isfinite(best_opt.lml) && best_opt.lml > best_init.lml + noise) {
    best_opt.improved = true;
    return best_opt;
  }
  best_init.improved = false;
  return best_init;
}

}  // namespace condkl
