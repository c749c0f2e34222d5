#ifndef HETDCOV_RESIDUAL_BOOTSTRAP_HPP
#define HETDCOV_RESIDUAL_BOOTSTRAP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/errors.hpp"
#include "hetdcov/mean_models.hpp"
#include "hetdcov/parallel.hpp"
#include "hetdcov/rng.hpp"
#include "hetdcov/variance_models.hpp"

namespace hetdcov {

/// What a per-replicate observer sees. Called from worker threads.
struct ReplicateView {
  std::size_t index = 0;
  int attempt = 0;
  std::span<const double> y_star;
  std::span<const double> statistics;
};

struct TestConfig {
  MeanModelSpec mean_spec = ParametricMean{linear_mean_family(), {}};
  VarianceFamily variance_family = quad_family();
  std::vector<double> theta_init;  // empty: the family's default start
  std::size_t bootstrap_B = 500;
  double alpha = 0.05;
  RngSpec seed{};
  double bandwidth_c = 1.2;
  unsigned threads = 1;  // 0 = hardware concurrency
  MeanFitOptions mean_options{};
  VarianceFitOptions variance_options{};
  std::function<void(const ReplicateView&)> on_replicate;

  void validate() const {
    if (bootstrap_B < 1) fail(ErrorKind::configuration, "bootstrap B must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::configuration, "alpha must lie in (0, 1)");
    if (!(bandwidth_c > 0.0) || !std::isfinite(bandwidth_c))
      fail(ErrorKind::configuration, "bandwidth constant c must be positive");
    if (!variance_family.eval) fail(ErrorKind::configuration, "no variance family configured");
    if (const auto* np = std::get_if<NonparametricMean>(&mean_spec); np && np->bandwidth && !(*np->bandwidth > 0.0))
      fail(ErrorKind::configuration, "bandwidth must be positive");
  }

  bool nonparametric() const { return std::holds_alternative<NonparametricMean>(mean_spec); }

  /// Bandwidth for kernel smoothing on a sample of size n in dimension p.
  double bandwidth(std::size_t n, std::size_t p) const {
    if (const auto* np = std::get_if<NonparametricMean>(&mean_spec); np && np->bandwidth) return *np->bandwidth;
    return default_bandwidth(n, p, bandwidth_c);
  }
};

struct Diagnostics {
  bool variance_floored = false;
  bool mean_nonconverged = false;
  bool variance_nonconverged = false;
  bool bandwidth_rate_note = false;  // nonparametric mode with p >= 3
  std::size_t bootstrap_failures = 0;
  std::size_t bootstrap_redraws = 0;
  std::vector<std::string> notes;
};

/// Mean fit, variance fit and the standardized-by-sigma residuals for one sample.
struct FittedModel {
  MeanFit mean;
  VarianceFit variance;
  std::vector<double> eta;  // (Y_i - m(X_i)) / sigma(X_i, theta)
};

/// Fits the null model the same way on the observed sample and on every bootstrap sample.
class NullModelFitter {
 public:
  NullModelFitter(const Dataset& ds, const TestConfig& cfg) : cfg_(&cfg) {
    if (cfg.nonparametric())
      smoother_ = std::make_shared<const NadarayaWatson>(ds.x(), KernelSpec{KernelSpec::Kind::gaussian_product,
                                                                            cfg.bandwidth(ds.n(), ds.p())});
  }

  /// warm: previous fit to start the optimizers from (bootstrap refits).
  FittedModel fit(const Dataset& sample, const FittedModel* warm = nullptr) const {
    FittedModel fm;
    if (smoother_) {
      fm.mean = fit_mean_nw(*smoother_, sample.y());
    } else {
      const auto& pm = std::get<ParametricMean>(cfg_->mean_spec);
      std::span<const double> start = pm.beta_init;
      if (warm && warm->mean.beta_hat) start = *warm->mean.beta_hat;
      fm.mean = fit_mean_parametric(sample, pm.family, start, cfg_->mean_options);
    }
    std::span<const double> theta0 = cfg_->theta_init;
    if (warm) theta0 = warm->variance.theta_hat;
    fm.variance = fit_variance(sample, fm.mean, cfg_->variance_family, theta0, cfg_->variance_options);
    fm.eta.resize(sample.n());
    for (std::size_t i = 0; i < sample.n(); ++i)
      fm.eta[i] = (sample.y()[i] - fm.mean.fitted_values[i]) / fm.variance.sigma_values[i];
    return fm;
  }

  const NadarayaWatson* smoother() const noexcept { return smoother_.get(); }

 private:
  const TestConfig* cfg_;
  std::shared_ptr<const NadarayaWatson> smoother_;
};

/// A statistic recomputed on each bootstrap sample from the refitted null model.
using SampleStatistic = std::function<double(const Dataset& sample, const FittedModel& fit)>;

struct Calibration {
  double p_value = 1.0;
  double critical_value = 0.0;
  bool reject = false;
};

/// p = (1 + #{T*_b >= T}) / (B + 1); critical value is the ceil((1 - alpha) B)-th order statistic.
inline Calibration calibrate(double statistic, std::span<const double> boot, double alpha) {
  const std::size_t b = boot.size();
  if (b == 0) fail(ErrorKind::calibration, "no bootstrap statistics to calibrate against");
  std::vector<double> sorted(boot.begin(), boot.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t exceed = static_cast<std::size_t>(
      sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), statistic));
  // The small offset keeps (1 - alpha) * B from rounding up past an exact integer.
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(b) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, b);
  Calibration c;
  c.p_value = static_cast<double>(1 + exceed) / static_cast<double>(b + 1);
  c.critical_value = sorted[k - 1];
  c.reject = statistic > c.critical_value;
  return c;
}

struct BootstrapOutcome {
  std::vector<std::vector<double>> stats;  // [statistic][successful replicate], in replicate order
  std::size_t failures = 0;
  std::size_t redraws = 0;
};

inline constexpr int max_replicate_attempts = 3;
inline constexpr double max_failure_fraction = 0.05;

/// Residual bootstrap: resample standardized eta, rebuild Y*, refit, recompute each statistic.
///
/// Replicate b draws from stream (seed, "boot", b); a redraw after a failed refit uses
/// (seed, "boot-redraw", 3b + attempt). Results do not depend on cfg.threads.
inline BootstrapOutcome run_bootstrap(const Dataset& ds, const TestConfig& cfg, const NullModelFitter& fitter,
                                      const FittedModel& fitted, std::span<const SampleStatistic> statistics) {
  const std::size_t n = ds.n();
  const std::size_t B = cfg.bootstrap_B;
  const auto errors = standardize_residuals(ResidualSet{fitted.eta, ResidualKind::raw_eta_hat});

  struct Slot {
    std::vector<double> values;
    int attempts = 0;
    bool ok = false;
  };
  std::vector<Slot> slots(B);

  parallel_for(B, cfg.threads, [&](std::size_t b) {
    Slot& slot = slots[b];
    std::vector<double> y_star(n);
    for (int attempt = 0; attempt < max_replicate_attempts; ++attempt) {
      slot.attempts = attempt + 1;
      auto eng = attempt == 0 ? cfg.seed.stream("boot", b)
                              : cfg.seed.stream("boot-redraw", 3 * static_cast<std::uint64_t>(b) + attempt);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i)
        y_star[i] = fitted.mean.fitted_values[i] + fitted.variance.sigma_values[i] * errors.values[pick(eng)];
      try {
        const Dataset sample = ds.with_response(y_star);
        const FittedModel refit = fitter.fit(sample, &fitted);
        slot.values.clear();
        for (const auto& stat : statistics) {
          const double v = stat(sample, refit);
          if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite bootstrap statistic");
          slot.values.push_back(v);
        }
        slot.ok = true;
        if (cfg.on_replicate) cfg.on_replicate(ReplicateView{b, attempt, y_star, slot.values});
        return;
      } catch (const Error&) {
        continue;
      }
    }
  });

  BootstrapOutcome out;
  out.stats.assign(statistics.size(), {});
  for (auto& s : out.stats) s.reserve(B);
  for (const auto& slot : slots) {
    out.redraws += static_cast<std::size_t>(slot.attempts - 1);
    if (!slot.ok) {
      ++out.failures;
      continue;
    }
    for (std::size_t k = 0; k < statistics.size(); ++k) out.stats[k].push_back(slot.values[k]);
  }
  if (static_cast<double>(out.failures) > max_failure_fraction * static_cast<double>(B))
    fail(ErrorKind::calibration, std::to_string(out.failures) + " of " + std::to_string(B) +
                                     " bootstrap replicates failed to refit");
  return out;
}

inline Diagnostics base_diagnostics(const Dataset& ds, const TestConfig& cfg, const FittedModel& fitted) {
  Diagnostics d;
  d.variance_floored = fitted.variance.floored;
  d.mean_nonconverged = !fitted.mean.converged;
  d.variance_nonconverged = !fitted.variance.converged;
  if (cfg.nonparametric() && ds.p() >= 3) {
    d.bandwidth_rate_note = true;
    d.notes.emplace_back("bandwidth c*n^(-1/(p+4)) with p >= 3 does not satisfy n*h^(2p) -> infinity");
  }
  if (d.variance_floored) d.notes.emplace_back("variance floor active at the fitted parameters");
  if (d.mean_nonconverged) d.notes.emplace_back("mean fit did not converge");
  if (d.variance_nonconverged) d.notes.emplace_back("variance fit did not converge");
  return d;
}

}  // namespace hetdcov

#endif  // HETDCOV_RESIDUAL_BOOTSTRAP_HPP
