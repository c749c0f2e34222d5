#ifndef HETDCOV_DCOV_ORACLE_HPP
#define HETDCOV_DCOV_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "hetdcov/errors.hpp"
#include "hetdcov/rng.hpp"

namespace hetdcov {

/// One draw of (Z, W); both may be vectors.
struct JointDraw {
  std::vector<double> z;
  std::vector<double> w;
};

using JointSampler = std::function<JointDraw(Engine&)>;

struct OracleEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Population-level Monte Carlo reference for dCov^2(Z, W) = E[U(Z,Z') V(W,W')].
///
/// U and V are the doubly centered distance kernels; their conditional expectations
/// E(|Z - Z'| | Z) and E(|Z - Z'|) are approximated with separate reference samples of the
/// Z- and W-marginals (drawn from distinct joint draws so the two estimates are independent).
/// The outer average runs over m independent pairs of copies.
inline OracleEstimate dcov_population_oracle(const JointSampler& sampler, std::size_t m, std::uint64_t seed,
                                             std::size_t reference_size = 4000) {
  if (m < 1000) fail(ErrorKind::configuration, "population oracle needs m >= 1000");
  const RngSpec rng{seed};
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };

  std::vector<std::vector<double>> ref_z(reference_size), ref_w(reference_size);
  {
    auto ez = rng.stream("oracle-ref-z", 0);
    auto ew = rng.stream("oracle-ref-w", 0);
    for (std::size_t k = 0; k < reference_size; ++k) {
      ref_z[k] = sampler(ez).z;
      ref_w[k] = sampler(ew).w;
    }
  }
  auto mean_to_ref = [&](const std::vector<double>& v, const std::vector<std::vector<double>>& ref) {
    double s = 0.0;
    for (const auto& r : ref) s += dist(v, r);
    return s / static_cast<double>(ref.size());
  };
  auto grand_mean = [&](const std::vector<std::vector<double>>& ref) {
    const std::size_t half = ref.size() / 2;
    double s = 0.0;
    for (std::size_t k = 0; k < half; ++k) s += dist(ref[k], ref[half + k]);
    return s / static_cast<double>(half);
  };
  const double ez_all = grand_mean(ref_z);
  const double ew_all = grand_mean(ref_w);

  auto eng = rng.stream("oracle-outer", 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    const JointDraw a = sampler(eng);
    const JointDraw b = sampler(eng);
    const double u = dist(a.z, b.z) - mean_to_ref(a.z, ref_z) - mean_to_ref(b.z, ref_z) + ez_all;
    const double v = dist(a.w, b.w) - mean_to_ref(a.w, ref_w) - mean_to_ref(b.w, ref_w) + ew_all;
    const double uv = u * v;
    sum += uv;
    sum_sq += uv * uv;
  }
  const double md = static_cast<double>(m);
  const double mean = sum / md;
  const double var = (sum_sq - md * mean * mean) / (md - 1.0);
  return {mean, std::sqrt(var / md)};
}

}  // namespace hetdcov

#endif  // HETDCOV_DCOV_ORACLE_HPP
