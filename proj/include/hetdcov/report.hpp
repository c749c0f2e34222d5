#ifndef HETDCOV_REPORT_HPP
#define HETDCOV_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/test_suite.hpp"

namespace hetdcov {

namespace detail {

inline std::string join_doubles(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += detail::format_double(v[i]);
  }
  return s;
}

inline void write_kv(std::ostream& out, std::string_view key, const std::string& value) {
  out << key << '=' << value << '\n';
}

inline void write_diagnostics(std::ostream& out, std::string_view prefix, const Diagnostics& d) {
  const std::string p(prefix);
  write_kv(out, p + "bootstrap_failures", std::to_string(d.bootstrap_failures));
  write_kv(out, p + "bootstrap_redraws", std::to_string(d.bootstrap_redraws));
  for (std::size_t i = 0; i < d.notes.size(); ++i) write_kv(out, p + "note" + std::to_string(i + 1), d.notes[i]);
}

inline void write_calibrated(std::ostream& out, std::string_view prefix, double statistic, double p_value,
                             double critical_value, bool reject, std::size_t b_eff) {
  const std::string p(prefix);
  write_kv(out, p + "statistic", detail::format_double(statistic));
  write_kv(out, p + "p_value", detail::format_double(p_value));
  write_kv(out, p + "critical_value", detail::format_double(critical_value));
  write_kv(out, p + "reject", reject ? "true" : "false");
  write_kv(out, p + "bootstrap_effective", std::to_string(b_eff));
}

}  // namespace detail

/// Plain key=value summary of a suite run. Doubles print in shortest round-trip form.
inline void write_summary(std::ostream& out, const SuiteReport& rep, const TestConfig& cfg, const Dataset& ds) {
  using detail::write_kv;
  write_kv(out, "n", std::to_string(ds.n()));
  write_kv(out, "p", std::to_string(ds.p()));
  write_kv(out, "mean_model", cfg.nonparametric() ? "nonparametric" : std::get<ParametricMean>(cfg.mean_spec).family.id);
  write_kv(out, "variance_family", cfg.variance_family.id);
  write_kv(out, "bootstrap_B", std::to_string(cfg.bootstrap_B));
  write_kv(out, "alpha", detail::format_double(cfg.alpha));
  write_kv(out, "seed", std::to_string(cfg.seed.master_seed));
  if (cfg.nonparametric() || rep.cvm || rep.wz) write_kv(out, "bandwidth", detail::format_double(cfg.bandwidth(ds.n(), ds.p())));

  const MeanFit& mean = rep.fitted.mean;
  const VarianceFit& var = rep.fitted.variance;
  if (mean.beta_hat) write_kv(out, "beta_hat", detail::join_doubles(*mean.beta_hat));
  write_kv(out, "mean_objective", detail::format_double(mean.objective));
  write_kv(out, "mean_converged", mean.converged ? "true" : "false");
  write_kv(out, "theta_hat", detail::join_doubles(var.theta_hat));
  write_kv(out, "variance_objective", detail::format_double(var.objective));
  write_kv(out, "variance_converged", var.converged ? "true" : "false");
  write_kv(out, "variance_floored", var.floored ? "true" : "false");
  if (rep.dcov) {
    const auto& r = *rep.dcov;
    write_kv(out, "dcov.u_n", detail::format_double(r.u_n));
    detail::write_calibrated(out, "dcov.", r.statistic, r.p_value, r.critical_value, r.reject, r.bootstrap_stats.size());
    detail::write_diagnostics(out, "dcov.", r.diagnostics);
  }
  for (const auto* c : {&rep.cvm, &rep.wz}) {
    if (!*c) continue;
    const auto& r = **c;
    const std::string prefix = std::string(to_string(r.which)) + ".";
    detail::write_calibrated(out, prefix, r.statistic, r.p_value, r.critical_value, r.reject, r.bootstrap_stats.size());
    detail::write_diagnostics(out, prefix, r.diagnostics);
  }
}

/// One row per successful bootstrap replicate, one column per selected test.
inline void write_bootstrap_csv(std::ostream& out, const SuiteReport& rep) {
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
  if (rep.dcov) cols.emplace_back("dcov", &rep.dcov->bootstrap_stats);
  if (rep.cvm) cols.emplace_back("cvm", &rep.cvm->bootstrap_stats);
  if (rep.wz) cols.emplace_back("wz", &rep.wz->bootstrap_stats);
  out << "replicate";
  for (const auto& c : cols) out << ',' << c.first;
  out << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().second->size();
  for (std::size_t b = 0; b < rows; ++b) {
    out << b + 1;
    for (const auto& c : cols) out << ',' << detail::format_double((*c.second)[b]);
    out << '\n';
  }
}

/// Residual diagnostics: covariates, response, fitted mean, fitted sigma and eta_hat.
inline void write_residuals_csv(std::ostream& out, const Dataset& ds, const FittedModel& fit,
                                std::span<const std::string> x_names = {}) {
  out << "index";
  for (std::size_t j = 0; j < ds.p(); ++j)
    out << ',' << (j < x_names.size() ? x_names[j] : "x" + std::to_string(j + 1));
  out << ",y,fitted_mean,sigma,eta_hat\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << i + 1;
    for (double v : ds.x(i)) out << ',' << detail::format_double(v);
    out << ',' << detail::format_double(ds.y()[i]) << ',' << detail::format_double(fit.mean.fitted_values[i]) << ','
        << detail::format_double(fit.variance.sigma_values[i]) << ',' << detail::format_double(fit.eta[i]) << '\n';
  }
}

}  // namespace hetdcov

#endif  // HETDCOV_REPORT_HPP
