// hetdcov: test a parametric variance function on CSV data, or run simulation scenarios.
//
// Exit codes: 0 success, 2 configuration / usage error, 3 data error, 4 calibration error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetdcov/report.hpp"
#include "hetdcov/simlab.hpp"
#include "hetdcov/test_suite.hpp"

namespace fs = std::filesystem;
using namespace hetdcov;

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_calibration = 4;

struct CommonOptions {
  std::size_t B = 500;
  double alpha = 0.05;
  double c = 1.2;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string tests = "dcov";
  std::string out = "hetdcov-out";
  bool no_timestamp = false;
};

struct TestOptions {
  std::string input, y;
  std::vector<std::string> x;
  std::string mean = "linear";
  double bandwidth = 0.0;
  std::string variance;
  std::vector<double> theta_init, beta_init;
};

struct SimOptions {
  std::string model = "H21";
  std::string mode = "nonlinear";
  std::vector<std::size_t> p{2};
  std::vector<std::size_t> n{50};
  std::vector<double> a{0.0};
  std::size_t reps = 300;
  std::vector<double> grid = default_bandwidth_grid();
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_tests) {
  cmd->add_option("--B", o.B, "bootstrap replicates")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", o.alpha, "significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", o.seed, "master seed; all randomness derives from it")->required();
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores; results do not depend on it")
      ->capture_default_str();
  if (with_tests)
    cmd->add_option("--test", o.tests, "dcov, cvm, wz, all, or a comma list")->capture_default_str();
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_flag("--no-timestamp", o.no_timestamp, "omit the timestamp line from summary.txt");
}

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::configuration, msg); }

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

std::string timestamp_line() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string("# generated ") + buf + "\n";
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) config_error("--out: cannot create directory '" + dir + "'");
  return fs::path(dir);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) config_error("cannot write " + path.string());
  f << text;
  if (!f) config_error("failed writing " + path.string());
}

TestSelection parse_tests(const std::string& spec) {
  try {
    return TestSelection::parse(spec);
  } catch (const Error& e) {
    config_error("--test: " + e.detail());
  }
}

int cmd_test(const CommonOptions& common, const TestOptions& o) {
  const MeanFamilyRegistry means;
  const VarianceFamilyRegistry variances;
  if (!variances.contains(o.variance))
    config_error("--variance: unknown family '" + o.variance + "' (available: " + join(variances.ids()) + ")");
  if (o.mean != "nonparametric" && !means.contains(o.mean))
    config_error("--mean: unknown model '" + o.mean + "' (available: " + join(means.ids()) + ", nonparametric)");
  if (o.mean == "nonparametric" && !o.beta_init.empty())
    config_error("--beta-init: not used with --mean nonparametric");
  if (o.bandwidth < 0.0) config_error("--bandwidth: must be positive");
  const TestSelection which = parse_tests(common.tests);

  TestConfig cfg;
  if (o.mean == "nonparametric") {
    NonparametricMean np;
    if (o.bandwidth > 0.0) np.bandwidth = o.bandwidth;
    cfg.mean_spec = np;
  } else {
    cfg.mean_spec = ParametricMean{means.get(o.mean), o.beta_init};
  }
  cfg.variance_family = variances.get(o.variance);
  cfg.theta_init = o.theta_init;
  cfg.bootstrap_B = common.B;
  cfg.alpha = common.alpha;
  cfg.bandwidth_c = common.c;
  cfg.seed = RngSpec{common.seed};
  cfg.threads = common.threads;
  cfg.validate();
  const fs::path out = prepare_out(common.out);

  if (!fs::is_regular_file(o.input)) config_error("--input: cannot open '" + o.input + "'");
  const Dataset ds = [&] {
    try {
      return load_dataset(o.input, o.y, o.x);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::configuration) config_error("--y/--x: " + e.detail());
      throw;
    }
  }();
  if (!o.theta_init.empty() && o.theta_init.size() != cfg.variance_family.dim(ds.p()))
    config_error("--theta-init: family '" + o.variance + "' takes " +
                 std::to_string(cfg.variance_family.dim(ds.p())) + " values for p = " + std::to_string(ds.p()));
  if (const auto* pm = std::get_if<ParametricMean>(&cfg.mean_spec);
      pm && !o.beta_init.empty() && o.beta_init.size() != pm->family.dim(ds.p()))
    config_error("--beta-init: model '" + o.mean + "' takes " + std::to_string(pm->family.dim(ds.p())) +
                 " values for p = " + std::to_string(ds.p()));

  const SuiteReport rep = run_suite(ds, cfg, which);

  std::ostringstream summary, boot, resid;
  if (!common.no_timestamp) summary << timestamp_line();
  summary << "input=" << o.input << '\n';
  write_summary(summary, rep, cfg, ds);
  write_bootstrap_csv(boot, rep);
  write_residuals_csv(resid, ds, rep.fitted, o.x);
  write_file(out / "summary.txt", summary.str());
  write_file(out / "bootstrap.csv", boot.str());
  write_file(out / "residuals.csv", resid.str());

  for (const auto& name : which.names()) {
    double p = 0.0;
    bool reject = false;
    if (name == "dcov") p = rep.dcov->p_value, reject = rep.dcov->reject;
    if (name == "cvm") p = rep.cvm->p_value, reject = rep.cvm->reject;
    if (name == "wz") p = rep.wz->p_value, reject = rep.wz->reject;
    std::cout << name << ": p-value " << detail::format_double(p) << (reject ? ", reject" : ", do not reject")
              << " at alpha " << detail::format_double(cfg.alpha) << '\n';
  }
  std::cout << "wrote " << (out / "summary.txt").string() << ", bootstrap.csv, residuals.csv\n";
  return 0;
}

SimulationScenario base_scenario(const CommonOptions& common, const SimOptions& o) {
  SimulationScenario scn;
  try {
    scn.model = parse_model(o.model);
    scn.mode = parse_mode(o.mode);
  } catch (const Error& e) {
    config_error("--model/--mode: " + e.detail());
  }
  scn.reps = o.reps;
  scn.bootstrap_B = common.B;
  scn.alpha = common.alpha;
  scn.bandwidth_c = common.c;
  scn.seed = common.seed;
  scn.threads = common.threads;
  return scn;
}

std::string scenario_header(const CommonOptions& common, const SimulationScenario& scn) {
  std::ostringstream s;
  if (!common.no_timestamp) s << timestamp_line();
  s << "model=" << to_string(scn.model) << "\nmode=" << to_string(scn.mode) << "\nreps=" << scn.reps
    << "\nbootstrap_B=" << scn.bootstrap_B << "\nalpha=" << detail::format_double(scn.alpha)
    << "\nseed=" << scn.seed << '\n';
  return s.str();
}

int cmd_simulate(const CommonOptions& common, const SimOptions& o) {
  SimulationScenario scn = base_scenario(common, o);
  scn.tests = parse_tests(common.tests);
  if (o.n.empty() || o.p.empty() || o.a.empty()) config_error("--n, --p and --a need at least one value");
  for (std::size_t p : o.p)
    for (double a : o.a) {
      try {
        validate_design(scn.model, p, a);
      } catch (const Error& e) {
        config_error("--p/--a: " + e.detail());
      }
    }
  for (std::size_t n : o.n)
    if (n < min_sample_size) config_error("--n: sample size must be >= 4");
  const fs::path out = prepare_out(common.out);

  PowerTable table;
  for (std::size_t p : o.p)
    for (std::size_t n : o.n) {
      scn.p = p;
      scn.n = n;
      const auto t = monte_carlo_grid(scn, o.a);
      table.rows.insert(table.rows.end(), t.rows.begin(), t.rows.end());
    }

  std::ostringstream csv, md, summary;
  write_power_csv(csv, table);
  write_power_markdown(md, table);
  summary << scenario_header(common, scn) << "bandwidth_c=" << detail::format_double(scn.bandwidth_c) << '\n';
  write_file(out / "power.csv", csv.str());
  write_file(out / "power.md", md.str());
  write_file(out / "summary.txt", summary.str());
  std::cout << md.str();
  return 0;
}

int cmd_sweep(const CommonOptions& common, const SimOptions& o) {
  SimulationScenario scn = base_scenario(common, o);
  if (o.n.size() != 1 || o.p.size() != 1 || o.a.size() != 1) config_error("sweep takes a single --n, --p and --a");
  if (o.grid.empty()) config_error("--grid: needs at least one value");
  for (double c : o.grid)
    if (!(c > 0.0)) config_error("--grid: bandwidth constants must be positive, got " + detail::format_double(c));
  scn.n = o.n[0];
  scn.p = o.p[0];
  scn.a = o.a[0];
  try {
    validate_design(scn.model, scn.p, scn.a);
  } catch (const Error& e) {
    config_error("--p/--a: " + e.detail());
  }
  if (scn.n < min_sample_size) config_error("--n: sample size must be >= 4");
  const fs::path out = prepare_out(common.out);

  const auto curve = bandwidth_sweep(scn, o.grid);
  std::ostringstream csv, summary;
  write_sweep_csv(csv, curve);
  scn.mode = FitMode::nonparametric;
  summary << scenario_header(common, scn) << "n=" << scn.n << "\np=" << scn.p
          << "\na=" << detail::format_double(scn.a) << '\n';
  write_file(out / "sweep.csv", csv.str());
  write_file(out / "summary.txt", summary.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance-covariance test for a parametric conditional variance function"};
  app.require_subcommand(1);

  CommonOptions test_common, sim_common, sweep_common;
  TestOptions topt;
  SimOptions sim_opt, sweep_opt;

  auto* test = app.add_subcommand("test", "test a variance family on CSV data");
  test->add_option("--input", topt.input, "CSV file with a header row")->required();
  test->add_option("--y", topt.y, "response column")->required();
  test->add_option("--x", topt.x, "covariate columns (comma separated or repeated)")->required()->delimiter(',');
  test->add_option("--mean", topt.mean, "mean model: linear, affine or nonparametric")->capture_default_str();
  test->add_option("--bandwidth", topt.bandwidth, "fixed kernel bandwidth h (nonparametric mean; default c*n^(-1/(p+4)))");
  test->add_option("--variance", topt.variance, "variance family: abs-linear, quad, sin-abs, constant, power-of-mean")
      ->required();
  test->add_option("--theta-init", topt.theta_init, "starting variance parameters (comma separated)")->delimiter(',');
  test->add_option("--beta-init", topt.beta_init, "starting mean parameters (comma separated)")->delimiter(',');
  test->add_option("--c", test_common.c, "bandwidth constant in h = c*n^(-1/(p+4))")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_common(test, test_common, true);

  auto add_design = [](CLI::App* cmd, SimOptions& o, bool lists) {
    cmd->add_option("--model", o.model, "H11, H12, H21 or H22")->capture_default_str();
    auto* p = cmd->add_option("--p", o.p, "covariate dimension")->capture_default_str();
    auto* n = cmd->add_option("--n", o.n, "sample size")->capture_default_str();
    auto* a = cmd->add_option("--a", o.a, "deviation amplitude, 0 = null")->capture_default_str();
    if (lists)
      for (auto* opt : {p, n, a}) opt->delimiter(',');
    cmd->add_option("--reps", o.reps, "Monte Carlo replications")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "empirical size/power of the tests on a simulation model");
  add_design(simulate, sim_opt, true);
  simulate->add_option("--mode", sim_opt.mode, "nonlinear or nonparametric")->capture_default_str();
  simulate->add_option("--c", sim_common.c, "bandwidth constant in h = c*n^(-1/(p+4))")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_common(simulate, sim_common, true);

  auto* sweep = app.add_subcommand("sweep", "nonparametric-mode rejection rate across bandwidth constants c");
  add_design(sweep, sweep_opt, false);
  sweep->add_option("--grid", sweep_opt.grid, "bandwidth constants c (comma separated)")
      ->capture_default_str()
      ->delimiter(',');
  add_common(sweep, sweep_common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return exit_config;
  }

  try {
    if (*test) return cmd_test(test_common, topt);
    if (*simulate) return cmd_simulate(sim_common, sim_opt);
    return cmd_sweep(sweep_common, sweep_opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::configuration: return exit_config;
      case ErrorKind::calibration: return exit_calibration;
      default: return exit_data;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_data;
  }
}
