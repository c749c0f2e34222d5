#ifndef HETDCOV_MEAN_MODELS_HPP
#define HETDCOV_MEAN_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hetdcov/core.hpp"
#include "hetdcov/errors.hpp"
#include "hetdcov/matrix.hpp"

namespace hetdcov {

/// A parametric regression function m(x, beta).
///
/// `gradient` may be left empty, in which case central finite differences are used.
/// Families that are linear in beta set `design`, which writes the regressor row for x;
/// they are then fitted in closed form.
struct MeanFamily {
  std::string id;
  std::function<std::size_t(std::size_t p)> dim;
  std::function<double(std::span<const double> x, std::span<const double> beta)> eval;
  std::function<void(std::span<const double> x, std::span<const double> beta, std::span<double> grad)> gradient;
  std::function<void(std::span<const double> x, std::span<double> row)> design;
};

inline MeanFamily linear_mean_family() {
  MeanFamily f;
  f.id = "linear";
  f.dim = [](std::size_t p) { return p; };
  f.eval = [](std::span<const double> x, std::span<const double> b) { return dot(x, b); };
  f.gradient = [](std::span<const double> x, std::span<const double>, std::span<double> g) {
    std::copy(x.begin(), x.end(), g.begin());
  };
  f.design = [](std::span<const double> x, std::span<double> row) { std::copy(x.begin(), x.end(), row.begin()); };
  return f;
}

inline MeanFamily affine_mean_family() {
  MeanFamily f;
  f.id = "affine";
  f.dim = [](std::size_t p) { return p + 1; };
  f.eval = [](std::span<const double> x, std::span<const double> b) { return b[0] + dot(x, b.subspan(1)); };
  f.gradient = [](std::span<const double> x, std::span<const double>, std::span<double> g) {
    g[0] = 1.0;
    std::copy(x.begin(), x.end(), g.begin() + 1);
  };
  f.design = [](std::span<const double> x, std::span<double> row) {
    row[0] = 1.0;
    std::copy(x.begin(), x.end(), row.begin() + 1);
  };
  return f;
}

/// Name -> family lookup. Starts with "linear" and "affine"; users add their own.
class MeanFamilyRegistry {
 public:
  MeanFamilyRegistry() {
    add(linear_mean_family());
    add(affine_mean_family());
  }

  void add(MeanFamily family) {
    if (family.id.empty() || !family.dim || !family.eval)
      fail(ErrorKind::configuration, "mean family needs an id, a dimension rule and an evaluator");
    families_[family.id] = std::move(family);
  }

  const MeanFamily& get(const std::string& id) const {
    const auto it = families_.find(id);
    if (it == families_.end()) fail(ErrorKind::configuration, "unknown mean family '" + id + "'");
    return it->second;
  }

  bool contains(const std::string& id) const { return families_.count(id) != 0; }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : families_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, MeanFamily> families_;
};

struct KernelSpec {
  enum class Kind { gaussian_product };
  Kind kind = Kind::gaussian_product;
  double bandwidth = 1.0;
};

struct ParametricMean {
  MeanFamily family;
  std::vector<double> beta_init;  // empty: zeros of the family dimension
};

struct NonparametricMean {
  std::optional<double> bandwidth;  // unset: bandwidth_c * n^(-1/(p+4))
};

using MeanModelSpec = std::variant<ParametricMean, NonparametricMean>;

struct MeanFit {
  std::vector<double> fitted_values;
  std::optional<std::vector<double>> beta_hat;
  double objective = 0.0;  // sum of squared errors
  bool converged = true;
  int iterations = 0;
};

struct MeanFitOptions {
  double gradient_tol = 1e-8;
  int max_iterations = 200;
};

/// h = c * n^(-1/(p+4)).
inline double default_bandwidth(std::size_t n, std::size_t p, double c = 1.2) {
  return c * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(p) + 4.0));
}

namespace detail {

inline double sum_squared_errors(const MeanFamily& fam, const Dataset& ds, std::span<const double> beta,
                                 std::span<double> fitted) {
  std::vector<double> sq(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    fitted[i] = fam.eval(ds.x(i), beta);
    const double r = ds.y()[i] - fitted[i];
    sq[i] = r * r;
  }
  return pairwise_sum(sq);
}

inline MeanFit fit_linear_design(const Dataset& ds, const MeanFamily& fam, std::size_t d) {
  const std::size_t n = ds.n();
  Eigen::MatrixXd design(n, d);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    fam.design(ds.x(i), row);
    for (std::size_t k = 0; k < d; ++k) design(i, k) = row[k];
  }
  const Eigen::Map<const Eigen::VectorXd> y(ds.y().data(), static_cast<Eigen::Index>(n));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (static_cast<std::size_t>(qr.rank()) < d)
    fail(ErrorKind::rank_deficiency, "design for mean family '" + fam.id + "' has rank " +
                                         std::to_string(qr.rank()) + " < " + std::to_string(d));
  const Eigen::VectorXd beta = qr.solve(y);
  MeanFit fit;
  fit.beta_hat = std::vector<double>(beta.data(), beta.data() + d);
  fit.fitted_values.resize(n);
  fit.objective = sum_squared_errors(fam, ds, *fit.beta_hat, fit.fitted_values);
  fit.converged = true;
  return fit;
}

inline void mean_jacobian_row(const MeanFamily& fam, std::span<const double> x, std::span<const double> beta,
                              std::span<double> grad) {
  if (fam.gradient) {
    fam.gradient(x, beta, grad);
    return;
  }
  std::vector<double> b(beta.begin(), beta.end());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(beta[k]));
    b[k] = beta[k] + h;
    const double up = fam.eval(x, b);
    b[k] = beta[k] - h;
    const double down = fam.eval(x, b);
    b[k] = beta[k];
    grad[k] = (up - down) / (2.0 * h);
  }
}

}  // namespace detail

/// Least-squares fit of a parametric mean.
///
/// Linear-in-beta families are solved by QR. Others use Gauss-Newton with
/// Levenberg damping; a step is only accepted when it lowers the SSE, so the
/// returned objective never exceeds the one at beta_init.
inline MeanFit fit_mean_parametric(const Dataset& ds, const MeanFamily& fam, std::span<const double> beta_init,
                                   const MeanFitOptions& opts = {}) {
  const std::size_t d = fam.dim(ds.p());
  if (fam.design) return detail::fit_linear_design(ds, fam, d);

  std::vector<double> beta(beta_init.begin(), beta_init.end());
  if (beta.empty()) beta.assign(d, 0.0);
  if (beta.size() != d)
    fail(ErrorKind::configuration, "mean family '" + fam.id + "' expects " + std::to_string(d) +
                                       " parameters, got " + std::to_string(beta.size()));
  for (double b : beta)
    if (!std::isfinite(b)) fail(ErrorKind::configuration, "non-finite initial mean parameter");

  const std::size_t n = ds.n();
  MeanFit fit;
  fit.fitted_values.resize(n);
  double sse = detail::sum_squared_errors(fam, ds, beta, fit.fitted_values);
  if (!std::isfinite(sse)) fail(ErrorKind::family_evaluation, "mean family '" + fam.id + "' is not finite at beta_init");

  Eigen::MatrixXd jac(n, d);
  Eigen::VectorXd resid(n);
  std::vector<double> grad_row(d), trial(d), trial_fitted(n);
  double lambda = 1e-3;
  fit.converged = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      detail::mean_jacobian_row(fam, ds.x(i), beta, grad_row);
      for (std::size_t k = 0; k < d; ++k) jac(i, k) = grad_row[k];
      resid(i) = ds.y()[i] - fit.fitted_values[i];
    }
    const Eigen::VectorXd g = jac.transpose() * resid;
    if (g.cwiseAbs().maxCoeff() <= opts.gradient_tol * (1.0 + sse)) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd h = jac.transpose() * jac;
    bool accepted = false;
    while (lambda <= 1e12) {
      Eigen::MatrixXd damped = h;
      for (std::size_t k = 0; k < d; ++k) damped(k, k) += lambda * std::max(h(k, k), 1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(g);
      for (std::size_t k = 0; k < d; ++k) trial[k] = beta[k] + step(k);
      const double sse_trial = detail::sum_squared_errors(fam, ds, trial, trial_fitted);
      if (std::isfinite(sse_trial) && sse_trial < sse) {
        const bool tiny = (sse - sse_trial) <= 1e-15 * std::max(1.0, sse);
        beta = trial;
        fit.fitted_values = trial_fitted;
        sse = sse_trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (tiny) fit.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at any damping: stationary to working precision.
      fit.converged = true;
      break;
    }
    if (fit.converged) break;
  }
  fit.iterations = it;
  fit.beta_hat = beta;
  fit.objective = sse;
  return fit;
}

/// Leave-one-out Nadaraya-Watson smoother with the Gaussian product kernel.
///
/// The weight matrix depends only on X and h, so one instance serves every
/// response vector smoothed over the same design (bootstrap refits included).
class NadarayaWatson {
 public:
  NadarayaWatson(const Matrix& x, const KernelSpec& kernel) : n_(x.rows()), weights_(x.rows(), x.rows()) {
    const double h = kernel.bandwidth;
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::configuration, "bandwidth must be positive");
    if (n_ < 2) fail(ErrorKind::size, "leave-one-out smoothing needs n >= 2");
    const auto p = static_cast<double>(x.cols());
    const double norm = std::pow(2.0 * std::numbers::pi, -p / 2.0) * std::pow(h, -p);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        double s = 0.0;
        const auto xi = x.row(i), xj = x.row(j);
        for (std::size_t k = 0; k < xi.size(); ++k) {
          const double u = (xi[k] - xj[k]) / h;
          s += u * u;
        }
        weights_(i, j) = weights_(j, i) = norm * std::exp(-0.5 * s);
      }
    for (std::size_t i = 0; i < n_; ++i) {
      const double denom = pairwise_sum(weights_.row(i));
      if (!(denom >= 1e-300))
        fail(ErrorKind::isolated_point, "observation " + std::to_string(i) + " has no kernel neighbours at h = " +
                                            std::to_string(h));
      for (double& w : weights_.row(i)) w /= denom;
    }
  }

  std::size_t n() const noexcept { return n_; }

  /// Normalized weight of observation j in the estimate at i (0 on the diagonal).
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }

  std::vector<double> smooth(std::span<const double> y) const {
    if (y.size() != n_) fail(ErrorKind::dimension, "smoother built for a different sample size");
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = dot(weights_.row(i), y);
    return out;
  }

 private:
  std::size_t n_;
  Matrix weights_;
};

inline MeanFit fit_mean_nw(const NadarayaWatson& smoother, std::span<const double> y) {
  MeanFit fit;
  fit.fitted_values = smoother.smooth(y);
  std::vector<double> sq(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sq[i] = (y[i] - fit.fitted_values[i]) * (y[i] - fit.fitted_values[i]);
  fit.objective = pairwise_sum(sq);
  return fit;
}

inline MeanFit fit_mean_nw(const Dataset& ds, const KernelSpec& kernel) {
  return fit_mean_nw(NadarayaWatson(ds.x(), kernel), ds.y());
}

}  // namespace hetdcov

#endif  // HETDCOV_MEAN_MODELS_HPP
