#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hetdcov/mean_models.hpp"
#include "hetdcov/simlab.hpp"
#include "oracles.hpp"

using namespace hetdcov;
using Catch::Approx;

namespace {

Dataset random_linear_data(std::mt19937_64& eng, std::size_t n, std::size_t p, double noise) {
  std::normal_distribution<double> normal;
  Matrix x(n, p);
  for (double& v : x.data()) v = normal(eng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 0.5;
    for (std::size_t j = 0; j < p; ++j) y[i] += (1.0 + static_cast<double>(j)) * x(i, j);
    y[i] += noise * normal(eng);
  }
  return Dataset(std::move(y), std::move(x));
}

MeanFamily exponential_family(bool with_gradient) {
  MeanFamily f;
  f.id = "exp";
  f.dim = [](std::size_t) { return std::size_t{2}; };
  f.eval = [](std::span<const double> x, std::span<const double> b) { return b[0] * std::exp(b[1] * x[0]); };
  if (with_gradient)
    f.gradient = [](std::span<const double> x, std::span<const double> b, std::span<double> g) {
      g[0] = std::exp(b[1] * x[0]);
      g[1] = b[0] * x[0] * std::exp(b[1] * x[0]);
    };
  return f;
}

}  // namespace

TEST_CASE("linear family interpolates noise-free data", "[mean]") {
  std::mt19937_64 eng(1);
  std::normal_distribution<double> normal;
  Matrix x(20, 3);
  for (double& v : x.data()) v = normal(eng);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = 2.0 * x(i, 0);
  const auto fit = fit_mean_parametric(Dataset(y, x), linear_mean_family(), {});
  REQUIRE(fit.beta_hat);
  CHECK((*fit.beta_hat)[0] == Approx(2.0).margin(1e-12));
  CHECK((*fit.beta_hat)[1] == Approx(0.0).margin(1e-12));
  CHECK((*fit.beta_hat)[2] == Approx(0.0).margin(1e-12));
  CHECK(fit.objective < 1e-20);
}

TEST_CASE("closed-form fit agrees with a normal-equations oracle", "[mean][oracle]") {
  std::mt19937_64 eng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = random_linear_data(eng, 30 + trial, 1 + trial % 4, 0.7);
    for (const auto& fam : {linear_mean_family(), affine_mean_family()}) {
      const std::size_t d = fam.dim(ds.p());
      std::vector<std::vector<double>> design(ds.n(), std::vector<double>(d));
      for (std::size_t i = 0; i < ds.n(); ++i) fam.design(ds.x(i), design[i]);
      const auto expected = oracle::ols_normal_equations(design, {ds.y().begin(), ds.y().end()});
      const auto fit = fit_mean_parametric(ds, fam, {});
      for (std::size_t k = 0; k < d; ++k) CHECK(std::abs((*fit.beta_hat)[k] - expected[k]) < 1e-8);

      double sse = 0.0;
      for (std::size_t i = 0; i < ds.n(); ++i) {
        const double r = ds.y()[i] - fam.eval(ds.x(i), *fit.beta_hat);
        sse += r * r;
      }
      CHECK(fit.objective == Approx(sse).epsilon(1e-8));
    }
  }
}

TEST_CASE("rank-deficient design is an error", "[mean]") {
  Matrix x(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);
  }
  const Dataset ds({1, 2, 3, 4, 5, 7}, x);
  try {
    fit_mean_parametric(ds, linear_mean_family(), {});
    FAIL("expected rank deficiency");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::rank_deficiency);
  }
}

TEST_CASE("H11 null: linear fit lands near beta0", "[mean][montecarlo]") {
  // Measured: 189 of 200 seeds fall inside the band.
  const auto beta0 = theta0(2);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto ds = generate(SimModel::H11, 50, 2, 0.0, seed);
    const auto fit = fit_mean_parametric(ds, linear_mean_family(), {});
    const double dx = (*fit.beta_hat)[0] - beta0[0], dy = (*fit.beta_hat)[1] - beta0[1];
    inside += std::sqrt(dx * dx + dy * dy) < 0.5 ? 1 : 0;
  }
  CHECK(inside >= 180);
}

TEST_CASE("Gauss-Newton on user families", "[mean]") {
  std::mt19937_64 eng(4);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  Matrix x(60, 1);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    x(i, 0) = unif(eng);
    y[i] = 1.5 * std::exp(0.8 * x(i, 0)) + 0.05 * normal(eng);
  }
  const Dataset ds(y, x);
  MeanFamilyRegistry reg;
  reg.add(exponential_family(false));
  CHECK(reg.contains("exp"));

  for (bool analytic : {true, false}) {
    const auto fam = analytic ? exponential_family(true) : reg.get("exp");
    const std::vector<double> init{1.0, 0.1};
    double init_sse = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) init_sse += std::pow(ds.y()[i] - fam.eval(ds.x(i), init), 2);
    const auto fit = fit_mean_parametric(ds, fam, init);
    CHECK(fit.converged);
    CHECK(fit.objective <= init_sse);
    CHECK((*fit.beta_hat)[0] == Approx(1.5).margin(0.05));
    CHECK((*fit.beta_hat)[1] == Approx(0.8).margin(0.05));
  }
  CHECK_THROWS_AS(reg.get("nope"), Error);
}

TEST_CASE("parametric objective never rises above the start", "[mean][property]") {
  std::mt19937_64 eng(6);
  std::normal_distribution<double> normal;
  const auto fam = exponential_family(true);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(25, 1);
    std::vector<double> y(25);
    for (std::size_t i = 0; i < 25; ++i) {
      x(i, 0) = normal(eng);
      y[i] = normal(eng);  // the family is misspecified on purpose
    }
    const Dataset ds(y, x);
    const std::vector<double> init{normal(eng), normal(eng)};
    double init_sse = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) init_sse += std::pow(ds.y()[i] - fam.eval(ds.x(i), init), 2);
    CHECK(fit_mean_parametric(ds, fam, init).objective <= init_sse);
  }
}

TEST_CASE("default_bandwidth", "[mean]") {
  CHECK(default_bandwidth(100, 2, 1.2) == Approx(0.5569906600).epsilon(1e-9));
  CHECK(default_bandwidth(1, 5, 1.0) == 1.0);
  CHECK(default_bandwidth(80, 3) == default_bandwidth(80, 3, 1.2));
  for (std::size_t n = 2; n < 200; ++n) CHECK(default_bandwidth(n, 2, 1.2) < default_bandwidth(n - 1, 2, 1.2));
  for (double c = 0.2; c < 3.0; c += 0.1) CHECK(default_bandwidth(50, 4, c) < default_bandwidth(50, 4, c + 0.05));
}

TEST_CASE("Nadaraya-Watson leave-one-out", "[mean][nw]") {
  SECTION("hand evaluation, n = 3") {
    const NadarayaWatson nw(Matrix(3, 1, {0, 1, 2}), {KernelSpec::Kind::gaussian_product, 1.0});
    const auto m = nw.smooth(std::vector<double>{0, 1, 2});
    // (e^{-1/2} * 1 + e^{-2} * 2) / (e^{-1/2} + e^{-2})
    CHECK(std::abs(m[0] - 1.1824255238063563) < 1e-12);
    CHECK(std::abs(m[1] - 1.0) < 1e-12);
  }
  SECTION("constant responses are reproduced") {
    std::mt19937_64 eng(9);
    const auto ds = random_linear_data(eng, 40, 3, 1.0);
    for (double h : {0.1, 0.7, 5.0}) {
      const NadarayaWatson nw(ds.x(), {KernelSpec::Kind::gaussian_product, h});
      for (double v : nw.smooth(std::vector<double>(40, 3.25))) CHECK(v == Approx(3.25).epsilon(1e-13));
    }
  }
  SECTION("huge bandwidth gives leave-one-out means") {
    std::mt19937_64 eng(10);
    const auto ds = random_linear_data(eng, 15, 2, 1.0);
    const auto fit = fit_mean_nw(ds, {KernelSpec::Kind::gaussian_product, 1e6});
    const double total = std::accumulate(ds.y().begin(), ds.y().end(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) CHECK(fit.fitted_values[i] == Approx((total - ds.y()[i]) / 14.0).epsilon(1e-9));
    CHECK_FALSE(fit.beta_hat);
  }
  SECTION("isolated point names the index") {
    try {
      NadarayaWatson(Matrix(4, 1, {0, 0.1, 0.2, 500}), {KernelSpec::Kind::gaussian_product, 0.5});
      FAIL("expected isolated-point error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::isolated_point);
      CHECK(std::string(e.what()).find("observation 3") != std::string::npos);
    }
  }
  SECTION("non-positive bandwidth") {
    CHECK_THROWS_AS(NadarayaWatson(Matrix(4, 1, {0, 1, 2, 3}), {KernelSpec::Kind::gaussian_product, 0.0}), Error);
  }
}

TEST_CASE("Nadaraya-Watson properties", "[mean][nw][property]") {
  std::mt19937_64 eng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 10 + static_cast<std::size_t>(trial) * 3;
    const auto ds = random_linear_data(eng, n, 1 + trial % 3, 1.5);
    const KernelSpec k{KernelSpec::Kind::gaussian_product, default_bandwidth(n, ds.p())};
    const auto fit = fit_mean_nw(ds, k);

    for (std::size_t i = 0; i < n; ++i) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) {
          lo = std::min(lo, ds.y()[j]);
          hi = std::max(hi, ds.y()[j]);
        }
      CHECK(fit.fitted_values[i] >= lo - 1e-12);
      CHECK(fit.fitted_values[i] <= hi + 1e-12);
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), eng);
    Matrix xp(n, ds.p());
    std::vector<double> yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yp[i] = ds.y()[perm[i]];
      for (std::size_t j = 0; j < ds.p(); ++j) xp(i, j) = ds.x()(perm[i], j);
    }
    const auto permuted = fit_mean_nw(Dataset(yp, xp), k);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(permuted.fitted_values[i] == Approx(fit.fitted_values[perm[i]]).epsilon(1e-12));
  }
}
