#ifndef HETDCOV_VARIANCE_MODELS_HPP
#define HETDCOV_VARIANCE_MODELS_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/errors.hpp"
#include "hetdcov/matrix.hpp"
#include "hetdcov/mean_models.hpp"
#include "hetdcov/nelder_mead.hpp"
#include "hetdcov/rng.hpp"

namespace hetdcov {

inline constexpr double default_variance_floor = 1e-8;

/// Parametric conditional-variance family sigma^2(x, theta).
///
/// `eval` returns the raw value; the floor is applied by callers through
/// floored_variance(). Families with `uses_mean` also read the fitted mean at x
/// (the power-of-mean family); the rest ignore that argument.
struct VarianceFamily {
  std::string id;
  std::function<std::size_t(std::size_t p)> dim;
  std::function<double(std::span<const double> x, std::span<const double> theta, double mean)> eval;
  /// Starting point given p and the mean squared mean-residual.
  std::function<std::vector<double>(std::size_t p, double mean_sq_resid)> initial;
  double floor = default_variance_floor;
  bool uses_mean = false;
};

namespace detail {

inline std::vector<double> unit_ones(std::size_t p) {
  return std::vector<double>(p, 1.0 / std::sqrt(static_cast<double>(p)));
}

inline VarianceFamily index_family(std::string id, double (*shape)(double)) {
  VarianceFamily f;
  f.id = std::move(id);
  f.dim = [](std::size_t p) { return p; };
  f.eval = [shape](std::span<const double> x, std::span<const double> t, double) { return shape(dot(x, t)); };
  f.initial = [](std::size_t p, double) { return unit_ones(p); };
  return f;
}

}  // namespace detail

/// 1 + |theta'x|
inline VarianceFamily abs_linear_family() {
  return detail::index_family("abs-linear", [](double t) { return 1.0 + std::abs(t); });
}

/// 1 + (theta'x)^2
inline VarianceFamily quad_family() {
  return detail::index_family("quad", [](double t) { return 1.0 + t * t; });
}

/// (1 + |sin(theta'x)|)^2
inline VarianceFamily sin_abs_family() {
  return detail::index_family("sin-abs", [](double t) {
    const double s = 1.0 + std::abs(std::sin(t));
    return s * s;
  });
}

inline VarianceFamily constant_family() {
  VarianceFamily f;
  f.id = "constant";
  f.dim = [](std::size_t) { return std::size_t{1}; };
  f.eval = [](std::span<const double>, std::span<const double> t, double) { return t[0]; };
  f.initial = [](std::size_t, double msr) { return std::vector<double>{msr}; };
  return f;
}

/// theta = (s2, tau): s2 * |m(x)|^(2 tau), with m(x) the fitted mean at x.
inline VarianceFamily power_of_mean_family() {
  VarianceFamily f;
  f.id = "power-of-mean";
  f.dim = [](std::size_t) { return std::size_t{2}; };
  f.eval = [](std::span<const double>, std::span<const double> t, double mean) {
    return t[0] * std::pow(std::abs(mean), 2.0 * t[1]);
  };
  f.initial = [](std::size_t, double msr) { return std::vector<double>{msr, 0.0}; };
  f.uses_mean = true;
  return f;
}

class VarianceFamilyRegistry {
 public:
  VarianceFamilyRegistry() {
    add(abs_linear_family());
    add(quad_family());
    add(sin_abs_family());
    add(constant_family());
    add(power_of_mean_family());
  }

  void add(VarianceFamily family) {
    if (family.id.empty() || !family.dim || !family.eval || !family.initial)
      fail(ErrorKind::configuration, "variance family needs an id, dimension rule, evaluator and initializer");
    if (!(family.floor > 0.0)) fail(ErrorKind::configuration, "variance floor must be positive");
    families_[family.id] = std::move(family);
  }

  const VarianceFamily& get(const std::string& id) const {
    const auto it = families_.find(id);
    if (it == families_.end()) fail(ErrorKind::configuration, "unknown variance family '" + id + "'");
    return it->second;
  }

  bool contains(const std::string& id) const { return families_.count(id) != 0; }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : families_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, VarianceFamily> families_;
};

/// max(sigma^2, floor); `floored` is set when the floor was applied. NaN passes through.
inline double floored_variance(const VarianceFamily& fam, std::span<const double> x, std::span<const double> theta,
                               double mean, bool& floored) {
  const double v = fam.eval(x, theta, mean);
  if (v < fam.floor) {
    floored = true;
    return fam.floor;
  }
  return v;
}

inline double sigma_at(const VarianceFamily& fam, std::span<const double> theta, std::span<const double> x,
                       std::optional<double> fitted_mean = std::nullopt) {
  if (fam.uses_mean && !fitted_mean)
    fail(ErrorKind::configuration, "variance family '" + fam.id + "' needs the fitted mean at x");
  const double v = fam.eval(x, theta, fitted_mean.value_or(0.0));
  if (!std::isfinite(v)) fail(ErrorKind::family_evaluation, "variance family '" + fam.id + "' is not finite");
  return std::sqrt(std::max(v, fam.floor));
}

struct VarianceFitOptions {
  int restarts = 5;  // the initial point plus restarts - 1 perturbations
  double perturbation = 0.5;
  std::uint64_t seed = 0x5eed;
  NelderMeadOptions optimizer{};
};

struct VarianceFit {
  std::vector<double> theta_hat;
  double objective = 0.0;
  std::vector<double> sigma_values;  // sigma(X_i, theta_hat), floored
  bool converged = false;
  int n_restarts_used = 0;
  int best_restart = 0;
  bool floored = false;  // floor active at theta_hat for some observation
};

/// sum_i [r_i^2 - sigma^2(X_i, theta)]^2 with the floor applied.
inline double variance_objective(const VarianceFamily& fam, const Matrix& x, std::span<const double> mean,
                                 std::span<const double> sq_resid, std::span<const double> theta) {
  bool floored = false;
  double s = 0.0;
  for (std::size_t i = 0; i < sq_resid.size(); ++i) {
    const double e = sq_resid[i] - floored_variance(fam, x.row(i), theta, mean[i], floored);
    s += e * e;
  }
  return s;
}

/// Squared mean-residuals (Y_i - m(X_i))^2.
inline std::vector<double> squared_residuals(std::span<const double> y, std::span<const double> fitted) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - fitted[i]) * (y[i] - fitted[i]);
  return out;
}

inline std::vector<double> default_theta_init(const VarianceFamily& fam, std::size_t p,
                                              std::span<const double> sq_resid) {
  const double msr = pairwise_sum(sq_resid) / static_cast<double>(sq_resid.size());
  return fam.initial(p, msr);
}

/// Nonlinear least-squares fit of theta from squared mean-residuals.
///
/// Nelder-Mead from theta_init and from opts.restarts - 1 seeded perturbations of it;
/// the lowest objective wins, ties going to the earlier restart.
inline VarianceFit fit_variance(const Dataset& ds, const MeanFit& mean_fit, const VarianceFamily& fam,
                                std::span<const double> theta_init, const VarianceFitOptions& opts = {}) {
  const std::size_t d = fam.dim(ds.p());
  if (mean_fit.fitted_values.size() != ds.n())
    fail(ErrorKind::dimension, "mean fit does not match the dataset");
  const auto sq = squared_residuals(ds.y(), mean_fit.fitted_values);
  std::vector<double> start(theta_init.begin(), theta_init.end());
  if (start.empty()) start = default_theta_init(fam, ds.p(), sq);
  if (start.size() != d)
    fail(ErrorKind::configuration, "variance family '" + fam.id + "' expects " + std::to_string(d) +
                                       " parameters, got " + std::to_string(start.size()));
  for (double t : start)
    if (!std::isfinite(t)) fail(ErrorKind::configuration, "non-finite initial variance parameter");

  const Matrix& x = ds.x();
  const std::span<const double> mean = mean_fit.fitted_values;
  const std::function<double(std::span<const double>)> objective = [&](std::span<const double> t) {
    return variance_objective(fam, x, mean, sq, t);
  };

  VarianceFit fit;
  double best = std::numeric_limits<double>::infinity();
  auto eng = RngSpec{opts.seed}.stream("variance-restart", 0);
  std::normal_distribution<double> normal;
  std::vector<double> point(d);
  for (int r = 0; r < opts.restarts; ++r) {
    for (std::size_t k = 0; k < d; ++k)
      point[k] = r == 0 ? start[k] : start[k] + opts.perturbation * std::max(std::abs(start[k]), 1.0) * normal(eng);
    const auto res = nelder_mead(objective, point, opts.optimizer);
    fit.converged = fit.converged || res.converged;
    if (res.value < best) {
      best = res.value;
      fit.theta_hat = res.x;
      fit.best_restart = r;
    }
  }
  fit.n_restarts_used = opts.restarts;
  if (!std::isfinite(best))
    fail(ErrorKind::family_evaluation, "variance family '" + fam.id + "' has no finite objective from any start");

  fit.sigma_values.resize(ds.n());
  std::vector<double> sq_err(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double v = floored_variance(fam, x.row(i), fit.theta_hat, mean[i], fit.floored);
    fit.sigma_values[i] = std::sqrt(v);
    sq_err[i] = (sq[i] - v) * (sq[i] - v);
  }
  fit.objective = pairwise_sum(sq_err);
  return fit;
}

/// sigma(X_i, theta) for every observation, floored.
inline std::vector<double> sigma_values(const VarianceFamily& fam, const Dataset& ds, std::span<const double> theta,
                                        std::span<const double> fitted_mean) {
  std::vector<double> out(ds.n());
  bool floored = false;
  for (std::size_t i = 0; i < ds.n(); ++i)
    out[i] = std::sqrt(floored_variance(fam, ds.x(i), theta, fitted_mean[i], floored));
  return out;
}

}  // namespace hetdcov

#endif  // HETDCOV_VARIANCE_MODELS_HPP
