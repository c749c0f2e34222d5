#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hetdcov/core.hpp"
#include "hetdcov/rng.hpp"

using namespace hetdcov;
using Catch::Approx;

namespace {

std::string csv_with_rows(std::size_t rows) {
  std::ostringstream os;
  os << "conc,count\n";
  for (std::size_t i = 0; i < rows; ++i) os << 0.5 * static_cast<double>(i) << ',' << 100 + 3 * i << '\n';
  return os.str();
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hetdcov::Error");
  return ErrorKind::data;
}

}  // namespace

TEST_CASE("standardize_residuals examples", "[core]") {
  SECTION("already standardized") {
    const auto out = standardize_residuals({{1.0, -1.0}});
    CHECK(out.values[0] == Approx(1.0).margin(1e-15));
    CHECK(out.values[1] == Approx(-1.0).margin(1e-15));
    CHECK(out.kind == ResidualKind::standardized);
  }
  SECTION("1/n variance") {
    const auto out = standardize_residuals({{2.0, 4.0, 6.0}});
    CHECK(out.values[0] == Approx(-std::sqrt(1.5)).epsilon(1e-14));
    CHECK(out.values[1] == Approx(0.0).margin(1e-15));
    CHECK(out.values[2] == Approx(std::sqrt(1.5)).epsilon(1e-14));
  }
  SECTION("constant vector is degenerate") {
    CHECK(kind_of([] { standardize_residuals({{5.0, 5.0, 5.0, 5.0}}); }) == ErrorKind::degenerate_residuals);
  }
}

TEST_CASE("standardize_residuals: mean 0, variance 1, idempotent", "[core][property]") {
  std::mt19937_64 eng(11);
  std::normal_distribution<double> normal(3.0, 7.0);
  for (int trial = 0; trial < 50; ++trial) {
    ResidualSet r;
    r.values.resize(5 + trial);
    for (auto& v : r.values) v = normal(eng);
    const auto once = standardize_residuals(r);
    double mean = 0.0, var = 0.0;
    for (double v : once.values) mean += v;
    mean /= static_cast<double>(once.size());
    for (double v : once.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(once.size());
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-10);
    const auto twice = standardize_residuals(once);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::abs(twice.values[i] - once.values[i]) < 1e-12);
  }
}

TEST_CASE("load_dataset", "[core][io]") {
  const std::vector<std::string> x{"conc"};

  SECTION("108 rows, one covariate") {
    std::istringstream in(csv_with_rows(108));
    const auto ds = read_dataset(in, "count", x);
    CHECK(ds.n() == 108);
    CHECK(ds.p() == 1);
    CHECK(ds.y()[5] == 115.0);
    CHECK(ds.x(5)[0] == 2.5);
  }
  SECTION("4 rows is the minimum") {
    std::istringstream in(csv_with_rows(4));
    CHECK(read_dataset(in, "count", x).n() == 4);
  }
  SECTION("3 rows is a size error") {
    std::istringstream in(csv_with_rows(3));
    CHECK(kind_of([&] { read_dataset(in, "count", x); }) == ErrorKind::size);
  }
  SECTION("missing column is a configuration error") {
    std::istringstream in(csv_with_rows(10));
    const std::vector<std::string> bad{"dose"};
    CHECK(kind_of([&] { read_dataset(in, "count", bad); }) == ErrorKind::configuration);
  }
  SECTION("bad cell names row and column") {
    std::istringstream in("conc,count\n1,2\n2,3\n3,abc\n4,5\n");
    try {
      read_dataset(in, "count", x);
      FAIL("expected a data error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
      const std::string msg = e.what();
      CHECK(msg.find("row 3") != std::string::npos);
      CHECK(msg.find("count") != std::string::npos);
    }
  }
  SECTION("non-finite cell") {
    std::istringstream in("conc,count\n1,2\n2,3\n3,inf\n4,5\n");
    CHECK(kind_of([&] { read_dataset(in, "count", x); }) == ErrorKind::data);
  }
  SECTION("missing file") {
    CHECK(kind_of([&] { load_dataset("/nonexistent/file.csv", "count", x); }) == ErrorKind::configuration);
  }
}

TEST_CASE("dataset CSV round trip is bit-exact", "[core][io][property]") {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial), p = 1 + static_cast<std::size_t>(trial % 3);
    std::vector<double> y(n);
    Matrix xm(n, p);
    for (auto& v : y) v = normal(eng) * std::pow(10.0, trial % 7 - 3);
    for (auto& v : xm.data()) v = normal(eng);
    const Dataset ds(y, xm);
    std::ostringstream out;
    write_dataset(out, ds);
    std::istringstream in(out.str());
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    const auto back = read_dataset(in, "y", names);
    CHECK(back.x() == ds.x());
    CHECK(std::equal(back.y().begin(), back.y().end(), ds.y().begin()));
  }
}

TEST_CASE("dataset invariants", "[core]") {
  CHECK(kind_of([] { Dataset({1, 2, 3}, Matrix(3, 1)); }) == ErrorKind::size);
  CHECK(kind_of([] { Dataset({1, 2, 3, 4}, Matrix(5, 1)); }) == ErrorKind::dimension);
  CHECK(kind_of([] { Dataset({1, 2, NAN, 4}, Matrix(4, 1)); }) == ErrorKind::data);
}

TEST_CASE("rng streams depend only on (seed, tag, index)", "[core][rng]") {
  const RngSpec spec{42};
  auto draw = [&](std::string_view tag, std::uint64_t idx) {
    auto eng = spec.stream(tag, idx);
    std::vector<std::uint64_t> v(8);
    for (auto& x : v) x = eng();
    return v;
  };
  const auto i_first = draw("boot", 3);
  const auto j_second = draw("boot", 9);
  const auto j_first = draw("boot", 9);
  const auto i_second = draw("boot", 3);
  CHECK(i_first == i_second);
  CHECK(j_first == j_second);
  CHECK(i_first != j_first);
  CHECK(draw("boot", 3) != draw("gen", 3));
  CHECK(RngSpec{43}.derive("boot", 3) != spec.derive("boot", 3));
}
