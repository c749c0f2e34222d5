#ifndef HETDCOV_SIMLAB_HPP
#define HETDCOV_SIMLAB_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/errors.hpp"
#include "hetdcov/mean_models.hpp"
#include "hetdcov/parallel.hpp"
#include "hetdcov/rng.hpp"
#include "hetdcov/test_suite.hpp"
#include "hetdcov/variance_models.hpp"

namespace hetdcov {

/// Simulation designs. All share Y = beta0'X + noise with X ~ N(0, I_p) and beta0 = (1,...,1)/sqrt(p).
enum class SimModel { H11, H12, H21, H22 };
enum class FitMode { nonlinear, nonparametric };

inline const char* to_string(SimModel m) {
  switch (m) {
    case SimModel::H11: return "H11";
    case SimModel::H12: return "H12";
    case SimModel::H21: return "H21";
    case SimModel::H22: return "H22";
  }
  return "?";
}

inline const char* to_string(FitMode m) { return m == FitMode::nonlinear ? "nonlinear" : "nonparametric"; }

inline SimModel parse_model(std::string_view s) {
  if (s == "H11") return SimModel::H11;
  if (s == "H12") return SimModel::H12;
  if (s == "H21") return SimModel::H21;
  if (s == "H22") return SimModel::H22;
  fail(ErrorKind::configuration, "unknown model '" + std::string(s) + "' (expected H11, H12, H21 or H22)");
}

inline FitMode parse_mode(std::string_view s) {
  if (s == "nonlinear") return FitMode::nonlinear;
  if (s == "nonparametric") return FitMode::nonparametric;
  fail(ErrorKind::configuration, "unknown mode '" + std::string(s) + "' (expected nonlinear or nonparametric)");
}

/// (1,...,1)/sqrt(p)
inline std::vector<double> theta0(std::size_t p) { return detail::unit_ones(p); }

/// p/2 ones then p/2 zeros, scaled by 1/sqrt(p/2).
inline std::vector<double> theta1(std::size_t p) {
  if (p % 2 != 0) fail(ErrorKind::configuration, "H12 needs an even dimension p");
  std::vector<double> t(p, 0.0);
  const double v = 1.0 / std::sqrt(static_cast<double>(p / 2));
  std::fill(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(p / 2), v);
  return t;
}

inline void validate_design(SimModel model, std::size_t p, double a) {
  if (p == 0) fail(ErrorKind::configuration, "dimension p must be >= 1");
  if (model == SimModel::H12) {
    if (p % 2 != 0) fail(ErrorKind::configuration, "H12 needs an even dimension p, got " + std::to_string(p));
    // 1 + |t| + a t stays non-negative for every t only when |a| <= 1.
    if (std::abs(a) > 1.0) fail(ErrorKind::configuration, "H12 needs |a| <= 1 for a valid variance");
  }
  if (!std::isfinite(a)) fail(ErrorKind::configuration, "deviation amplitude must be finite");
}

/// Conditional standard deviation of Y given X = x.
inline double generator_sd(SimModel model, std::span<const double> x, double a) {
  const std::size_t p = x.size();
  switch (model) {
    case SimModel::H11: {
      const double t = dot(theta0(p), x);
      return std::sqrt(1.0 + std::abs(t + a * std::exp(t)));
    }
    case SimModel::H12: {
      const double t = dot(theta1(p), x);
      return std::sqrt(1.0 + std::abs(t) + a * t);
    }
    case SimModel::H21: {
      const double t = dot(theta0(p), x);
      return std::sqrt(std::abs(1.0 + t * t + a * std::sin(t)));
    }
    case SimModel::H22: {
      const double t = dot(theta0(p), x);
      return std::abs(1.0 + std::abs(std::sin(t)) + a * std::exp(t));
    }
  }
  return 0.0;
}

/// Variance family that the a = 0 design belongs to.
inline VarianceFamily null_family(SimModel model) {
  switch (model) {
    case SimModel::H11:
    case SimModel::H12: return abs_linear_family();
    case SimModel::H21: return quad_family();
    case SimModel::H22: return sin_abs_family();
  }
  return abs_linear_family();
}

/// Parameter of null_family(model) that reproduces the a = 0 design.
inline std::vector<double> null_theta(SimModel model, std::size_t p) {
  return model == SimModel::H12 ? theta1(p) : theta0(p);
}

inline Dataset generate(SimModel model, std::size_t n, std::size_t p, double a, std::uint64_t seed) {
  validate_design(model, p, a);
  Engine eng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, p);
  for (double& v : x.data()) v = normal(eng);
  const auto beta = theta0(p);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = normal(eng);
    y[i] = dot(beta, x.row(i)) + generator_sd(model, x.row(i), a) * eps;
  }
  return Dataset(std::move(y), std::move(x));
}

struct SimulationScenario {
  SimModel model = SimModel::H21;
  std::size_t n = 50;
  std::size_t p = 2;
  double a = 0.0;
  FitMode mode = FitMode::nonlinear;
  std::size_t reps = 300;
  std::size_t bootstrap_B = 300;
  double alpha = 0.05;
  double bandwidth_c = 1.2;
  TestSelection tests{};
  std::uint64_t seed = 1;
  unsigned threads = 0;  // across replications; 0 = hardware

  void validate() const {
    validate_design(model, p, a);
    if (reps < 1) fail(ErrorKind::configuration, "reps must be >= 1");
    if (n < min_sample_size) fail(ErrorKind::configuration, "n must be >= 4");
    if (tests.names().empty()) fail(ErrorKind::configuration, "no test selected");
  }

  /// Config used for each replication; the seed is replaced per replicate.
  TestConfig test_config() const {
    TestConfig cfg;
    if (mode == FitMode::nonlinear) cfg.mean_spec = ParametricMean{linear_mean_family(), {}};
    else cfg.mean_spec = NonparametricMean{};
    cfg.variance_family = null_family(model);
    cfg.bootstrap_B = bootstrap_B;
    cfg.alpha = alpha;
    cfg.bandwidth_c = bandwidth_c;
    cfg.threads = 1;
    return cfg;
  }
};

struct PowerRow {
  SimModel model = SimModel::H21;
  FitMode mode = FitMode::nonlinear;
  std::size_t p = 0;
  std::size_t n = 0;
  double a = 0.0;
  std::string test;
  std::size_t reps = 0;
  std::size_t rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  std::size_t failures = 0;
};

struct PowerTable {
  std::vector<PowerRow> rows;

  const PowerRow* find(std::string_view test) const {
    for (const auto& r : rows)
      if (r.test == test) return &r;
    return nullptr;
  }
};

/// Data for replicate r comes from (seed, "gen:<model>", r) and the bootstrap from
/// (seed, "test:<model>", r). Neither depends on a or c, so grids over them are coupled.
inline PowerTable monte_carlo(const SimulationScenario& scn) {
  scn.validate();
  const RngSpec root{scn.seed};
  const std::string model = to_string(scn.model);
  const auto names = scn.tests.names();
  const TestConfig base = scn.test_config();

  struct Outcome {
    std::vector<char> reject;
    bool failed = false;
  };
  std::vector<Outcome> outcomes(scn.reps);
  parallel_for(scn.reps, scn.threads, [&](std::size_t r) {
    Outcome& o = outcomes[r];
    try {
      const Dataset ds = generate(scn.model, scn.n, scn.p, scn.a, root.derive("gen:" + model, r));
      TestConfig cfg = base;
      cfg.seed = root.child("test:" + model, r);
      const SuiteReport rep = run_suite(ds, cfg, scn.tests);
      if (rep.dcov) o.reject.push_back(rep.dcov->reject);
      if (rep.cvm) o.reject.push_back(rep.cvm->reject);
      if (rep.wz) o.reject.push_back(rep.wz->reject);
    } catch (const Error&) {
      o.failed = true;
    }
  });

  PowerTable table;
  for (std::size_t k = 0; k < names.size(); ++k) {
    PowerRow row{scn.model, scn.mode, scn.p, scn.n, scn.a, names[k], scn.reps};
    for (const auto& o : outcomes) {
      if (o.failed) ++row.failures;
      else row.rejections += o.reject[k] ? 1 : 0;
    }
    row.rate = static_cast<double>(row.rejections) / static_cast<double>(scn.reps);
    row.se = std::sqrt(row.rate * (1.0 - row.rate) / static_cast<double>(scn.reps));
    if (static_cast<double>(row.failures) > max_failure_fraction * static_cast<double>(scn.reps))
      fail(ErrorKind::calibration, std::to_string(row.failures) + " of " + std::to_string(scn.reps) +
                                       " replications failed for test " + row.test + " in " + model);
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// One scenario per amplitude, sharing seeds.
inline PowerTable monte_carlo_grid(SimulationScenario scn, std::span<const double> a_grid) {
  PowerTable out;
  for (double a : a_grid) {
    scn.a = a;
    auto t = monte_carlo(scn);
    out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
  }
  return out;
}

struct SweepPoint {
  double c = 0.0;
  double rate = 0.0;
  double se = 0.0;
  std::size_t failures = 0;
};

inline std::vector<double> default_bandwidth_grid() { return {0.6, 0.8, 1.0, 1.2, 1.4}; }

/// Nonparametric-mode size/power of the dcov test across bandwidth constants c.
inline std::vector<SweepPoint> bandwidth_sweep(SimulationScenario scn, std::span<const double> c_grid) {
  for (double c : c_grid)
    if (!(c > 0.0)) fail(ErrorKind::configuration, "bandwidth constants must be positive");
  scn.mode = FitMode::nonparametric;
  scn.tests = TestSelection{true, false, false};
  std::vector<SweepPoint> out;
  for (double c : c_grid) {
    scn.bandwidth_c = c;
    const auto t = monte_carlo(scn);
    const auto& r = t.rows.front();
    out.push_back({c, r.rate, r.se, r.failures});
  }
  return out;
}

namespace detail {

inline std::string fmt_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string fmt_general(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace detail

inline void write_power_csv(std::ostream& out, const PowerTable& t) {
  out << "model,mode,p,n,a,test,reps,rate,se,failures\n";
  for (const auto& r : t.rows)
    out << to_string(r.model) << ',' << to_string(r.mode) << ',' << r.p << ',' << r.n << ','
        << detail::fmt_general(r.a) << ',' << r.test << ',' << r.reps << ',' << detail::fmt_fixed(r.rate, 6) << ','
        << detail::fmt_fixed(r.se, 6) << ',' << r.failures << '\n';
}

/// Rows (model, mode, p, a); columns test x n, in the layout of a published size/power table.
inline void write_power_markdown(std::ostream& out, const PowerTable& t) {
  std::vector<std::pair<std::string, std::size_t>> columns;
  using Key = std::tuple<std::string, std::string, std::size_t, double>;
  std::vector<Key> keys;
  std::map<std::pair<Key, std::pair<std::string, std::size_t>>, double> cells;
  for (const auto& r : t.rows) {
    const std::pair<std::string, std::size_t> col{r.test, r.n};
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    const Key key{to_string(r.model), to_string(r.mode), r.p, r.a};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    cells[{key, col}] = r.rate;
  }
  std::vector<std::string> header{"model", "mode", "p", "a"};
  for (const auto& [test, n] : columns) header.push_back(test + " n=" + std::to_string(n));
  std::vector<std::vector<std::string>> body;
  for (const auto& key : keys) {
    std::vector<std::string> row{std::get<0>(key), std::get<1>(key), std::to_string(std::get<2>(key)),
                                 detail::fmt_fixed(std::get<3>(key), 1)};
    for (const auto& col : columns) {
      const auto it = cells.find({key, col});
      row.push_back(it == cells.end() ? "" : detail::fmt_fixed(it->second, 3));
    }
    body.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : body) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& cells_) {
    out << '|';
    for (std::size_t c = 0; c < cells_.size(); ++c) out << ' ' << std::setw(static_cast<int>(width[c])) << cells_[c] << " |";
    out << '\n';
  };
  emit(header);
  out << '|';
  for (auto w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (const auto& row : body) emit(row);
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& curve) {
  out << "c,rate,se\n";
  for (const auto& pt : curve)
    out << detail::fmt_general(pt.c) << ',' << detail::fmt_fixed(pt.rate, 6) << ',' << detail::fmt_fixed(pt.se, 6)
        << '\n';
}

}  // namespace hetdcov

#endif  // HETDCOV_SIMLAB_HPP
