#ifndef HETDCOV_COMPETITORS_HPP
#define HETDCOV_COMPETITORS_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/errors.hpp"
#include "hetdcov/matrix.hpp"
#include "hetdcov/mean_models.hpp"
#include "hetdcov/residual_bootstrap.hpp"
#include "hetdcov/variance_models.hpp"

namespace hetdcov {

enum class Competitor { cvm, wz };

inline const char* to_string(Competitor c) { return c == Competitor::cvm ? "cvm" : "wz"; }

struct CompetitorReport {
  Competitor which = Competitor::cvm;
  double statistic = 0.0;
  double p_value = 1.0;
  double critical_value = 0.0;
  bool reject = false;
  std::vector<double> bootstrap_stats;
  Diagnostics diagnostics;
};

inline constexpr const char* cvm_bootstrap_note =
    "CvM critical value from the plain residual bootstrap, not the smooth residual bootstrap";

/// n * integral (F_eps - F_eta)^2 dF_eps with right-continuous empirical CDFs, i.e.
/// sum_i [F_eps(eps_i) - F_eta(eps_i)]^2.
inline double cvm_statistic(const ResidualSet& eps_hat, const ResidualSet& eta_hat) {
  const std::size_t n = eps_hat.size();
  if (eta_hat.size() != n) fail(ErrorKind::dimension, "CvM residual sets differ in length");
  if (n == 0) return 0.0;
  std::vector<double> se(eps_hat.values), sh(eta_hat.values);
  std::sort(se.begin(), se.end());
  std::sort(sh.begin(), sh.end());
  const double nn = static_cast<double>(n);
  double t = 0.0;
  for (double y : eps_hat.values) {
    const double fe = static_cast<double>(std::upper_bound(se.begin(), se.end(), y) - se.begin()) / nn;
    const double fh = static_cast<double>(std::upper_bound(sh.begin(), sh.end(), y) - sh.begin()) / nn;
    t += (fe - fh) * (fe - fh);
  }
  return t;
}

/// Nonparametric sigma(X_i): sqrt of the leave-one-out NW smooth of squared mean-residuals, floored.
inline std::vector<double> nonparametric_sigma(const NadarayaWatson& smoother, std::span<const double> y,
                                               std::span<const double> fitted,
                                               double floor = default_variance_floor) {
  auto s2 = smoother.smooth(squared_residuals(y, fitted));
  for (auto& v : s2) v = std::sqrt(std::max(v, floor));
  return s2;
}

/// (Y_i - m(X_i)) / sigma_hat(X_i) with the nonparametric scale.
inline ResidualSet nonparametric_residuals(const NadarayaWatson& smoother, std::span<const double> y,
                                           std::span<const double> fitted) {
  const auto sig = nonparametric_sigma(smoother, y, fitted);
  ResidualSet r{std::vector<double>(y.size()), ResidualKind::raw_eta_hat};
  for (std::size_t i = 0; i < y.size(); ++i) r.values[i] = (y[i] - fitted[i]) / sig[i];
  return r;
}

namespace detail {

inline double std_normal_density(double sq_norm, std::size_t p) {
  return std::pow(2.0 * std::numbers::pi, -static_cast<double>(p) / 2.0) * std::exp(-0.5 * sq_norm);
}

/// K((X_i - X_j)/h) / (n (n-1) h^p) for i != j, zero diagonal.
inline Matrix wz_weights(const Matrix& x, double h) {
  const std::size_t n = x.rows(), p = x.cols();
  const double scale =
      1.0 / (static_cast<double>(n) * static_cast<double>(n - 1) * std::pow(h, static_cast<double>(p)));
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        const double u = (x(i, c) - x(j, c)) / h;
        s += u * u;
      }
      k(i, j) = k(j, i) = scale * std_normal_density(s, p);
    }
  return k;
}

inline double wz_quadratic_form(const Matrix& weights, std::span<const double> u) {
  std::vector<double> rows(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) rows[i] = u[i] * dot(weights.row(i), u);
  return pairwise_sum(rows);
}

}  // namespace detail

/// Kernel-weighted U-statistic in the marks u_i.
inline double wz_statistic(const Matrix& x, std::span<const double> marks, const KernelSpec& kernel) {
  if (marks.size() != x.rows()) fail(ErrorKind::dimension, "marks do not match the covariates");
  if (x.rows() < 2) fail(ErrorKind::size, "WZ statistic needs n >= 2");
  if (!(kernel.bandwidth > 0.0)) fail(ErrorKind::configuration, "bandwidth must be positive");
  return detail::wz_quadratic_form(detail::wz_weights(x, kernel.bandwidth), marks);
}

/// Marks u_i = (Y_i - m(X_i))^2 - sigma^2(X_i, theta_hat).
inline std::vector<double> wz_marks(const Dataset& ds, const MeanFit& mean_fit, const VarianceFit& var_fit) {
  std::vector<double> u = squared_residuals(ds.y(), mean_fit.fitted_values);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] -= var_fit.sigma_values[i] * var_fit.sigma_values[i];
  return u;
}

inline double wz_statistic(const Dataset& ds, const MeanFit& mean_fit, const VarianceFit& var_fit,
                           const KernelSpec& kernel) {
  return wz_statistic(ds.x(), wz_marks(ds, mean_fit, var_fit), kernel);
}

class CvmBootstrapStatistic {
 public:
  /// parametric_scale replaces sigma_hat by sigma(., theta_hat) on both sides (a wiring check; T == 0).
  CvmBootstrapStatistic(const Dataset& ds, double bandwidth, bool parametric_scale = false)
      : smoother_(std::make_shared<const NadarayaWatson>(ds.x(), KernelSpec{KernelSpec::Kind::gaussian_product,
                                                                            bandwidth})),
        parametric_scale_(parametric_scale) {}

  double operator()(const Dataset& sample, const FittedModel& fit) const {
    const ResidualSet eta{fit.eta, ResidualKind::raw_eta_hat};
    if (parametric_scale_) return cvm_statistic(eta, eta);
    return cvm_statistic(nonparametric_residuals(*smoother_, sample.y(), fit.mean.fitted_values), eta);
  }

 private:
  std::shared_ptr<const NadarayaWatson> smoother_;
  bool parametric_scale_;
};

class WzBootstrapStatistic {
 public:
  WzBootstrapStatistic(const Dataset& ds, double bandwidth)
      : weights_(std::make_shared<const Matrix>(detail::wz_weights(ds.x(), bandwidth))) {}

  double operator()(const Dataset& sample, const FittedModel& fit) const {
    return detail::wz_quadratic_form(*weights_, wz_marks(sample, fit.mean, fit.variance));
  }

 private:
  std::shared_ptr<const Matrix> weights_;
};

/// Kernel bandwidth used by both competitors: the artifact-wide c * n^(-1/(p+4)) rule.
inline double competitor_bandwidth(const Dataset& ds, const TestConfig& cfg) { return cfg.bandwidth(ds.n(), ds.p()); }

inline SampleStatistic make_competitor_statistic(const Dataset& ds, const TestConfig& cfg, Competitor which) {
  const double h = competitor_bandwidth(ds, cfg);
  if (which == Competitor::cvm) return CvmBootstrapStatistic(ds, h);
  return WzBootstrapStatistic(ds, h);
}

inline CompetitorReport run_competitor(const Dataset& ds, const TestConfig& cfg, Competitor which) {
  cfg.validate();
  const NullModelFitter fitter(ds, cfg);
  const FittedModel fitted = fitter.fit(ds);
  const SampleStatistic stat = make_competitor_statistic(ds, cfg, which);

  CompetitorReport rep;
  rep.which = which;
  rep.diagnostics = base_diagnostics(ds, cfg, fitted);
  if (which == Competitor::cvm) rep.diagnostics.notes.emplace_back(cvm_bootstrap_note);
  rep.statistic = stat(ds, fitted);

  const SampleStatistic stats[] = {stat};
  auto boot = run_bootstrap(ds, cfg, fitter, fitted, stats);
  rep.bootstrap_stats = std::move(boot.stats[0]);
  rep.diagnostics.bootstrap_failures = boot.failures;
  rep.diagnostics.bootstrap_redraws = boot.redraws;
  const auto cal = calibrate(rep.statistic, rep.bootstrap_stats, cfg.alpha);
  rep.p_value = cal.p_value;
  rep.critical_value = cal.critical_value;
  rep.reject = cal.reject;
  return rep;
}

}  // namespace hetdcov

#endif  // HETDCOV_COMPETITORS_HPP
