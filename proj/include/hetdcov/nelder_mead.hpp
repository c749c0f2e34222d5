#ifndef HETDCOV_NELDER_MEAD_HPP
#define HETDCOV_NELDER_MEAD_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace hetdcov {

struct NelderMeadOptions {
  double diameter_tol = 1e-8;
  int max_iterations = 500;
  double initial_step = 0.1;  // relative to max(|x_k|, 1)
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;  // diameter criterion met before the iteration cap
};

/// Derivative-free minimization with the standard reflection/expansion/contraction/shrink moves.
///
/// Non-finite objective values are treated as +inf. The starting point is a vertex of the
/// initial simplex and the best vertex only ever improves, so value <= f(start).
inline NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                    std::span<const double> start, const NelderMeadOptions& opts = {}) {
  const std::size_t d = start.size();
  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> simplex(d + 1, std::vector<double>(start.begin(), start.end()));
  for (std::size_t k = 0; k < d; ++k) simplex[k + 1][k] += opts.initial_step * std::max(std::abs(start[k]), 1.0);
  std::vector<double> values(d + 1);
  for (std::size_t v = 0; v <= d; ++v) values[v] = eval(simplex[v]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), reflected(d), expanded(d), contracted(d);
  NelderMeadResult out;

  auto diameter = [&](std::size_t best) {
    double m = 0.0;
    for (std::size_t v = 0; v <= d; ++v) {
      if (v == best) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (simplex[v][k] - simplex[best][k]) * (simplex[v][k] - simplex[best][k]);
      m = std::max(m, s);
    }
    return std::sqrt(m);
  };

  int it = 0;
  for (;; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    if (diameter(best) < opts.diameter_tol) {
      out.converged = true;
      break;
    }
    if (it >= opts.max_iterations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= d; ++v)
      if (v != worst)
        for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[v][k];
    for (auto& c : centroid) c /= static_cast<double>(d);

    for (std::size_t k = 0; k < d; ++k) reflected[k] = centroid[k] + (centroid[k] - simplex[worst][k]);
    const double fr = eval(reflected);

    if (fr < values[best]) {
      for (std::size_t k = 0; k < d; ++k) expanded[k] = centroid[k] + 2.0 * (centroid[k] - simplex[worst][k]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    for (std::size_t k = 0; k < d; ++k)
      contracted[k] = outside ? centroid[k] + 0.5 * (reflected[k] - centroid[k])
                              : centroid[k] + 0.5 * (simplex[worst][k] - centroid[k]);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t v = 0; v <= d; ++v) {
      if (v == best) continue;
      for (std::size_t k = 0; k < d; ++k) simplex[v][k] = simplex[best][k] + 0.5 * (simplex[v][k] - simplex[best][k]);
      values[v] = eval(simplex[v]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  out.x = simplex[best];
  out.value = values[best];
  out.iterations = it;
  return out;
}

}  // namespace hetdcov

#endif  // HETDCOV_NELDER_MEAD_HPP
