#ifndef HETDCOV_DCOV_HPP
#define HETDCOV_DCOV_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hetdcov/errors.hpp"
#include "hetdcov/matrix.hpp"

namespace hetdcov {

/// Symmetric n x n matrix of Euclidean distances with a zero diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Matrix d) : d_(std::move(d)) {
    if (d_.rows() != d_.cols()) fail(ErrorKind::dimension, "distance matrix must be square");
  }
  std::size_t n() const noexcept { return d_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return d_(i, j); }
  std::span<const double> row(std::size_t i) const { return d_.row(i); }
  const Matrix& matrix() const noexcept { return d_; }

 private:
  Matrix d_;
};

/// U-centered distance matrix. The diagonal is held at 0 and never enters a sum.
class UCenteredMatrix {
 public:
  explicit UCenteredMatrix(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) fail(ErrorKind::dimension, "U-centered matrix must be square");
  }
  std::size_t n() const noexcept { return a_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return a_(i, j); }
  std::span<const double> row(std::size_t i) const { return a_.row(i); }
  const Matrix& matrix() const noexcept { return a_; }

 private:
  Matrix a_;
};

struct DcovStatistic {
  double value = 0.0;  // may be negative
  std::size_t n = 0;
};

inline DistanceMatrix pairwise_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  if (n == 0 || points.cols() == 0) fail(ErrorKind::size, "pairwise_distances needs at least one point and column");
  for (double v : points.data())
    if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite coordinate in pairwise_distances");
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = points.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = points.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) {
        const double diff = xi[k] - xj[k];
        s += diff * diff;
      }
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  }
  return DistanceMatrix(std::move(d));
}

/// Scalar samples, treated as one-dimensional points.
inline DistanceMatrix pairwise_distances(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) fail(ErrorKind::size, "pairwise_distances needs at least one point");
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite value in pairwise_distances");
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = std::abs(values[i] - values[j]);
  return DistanceMatrix(std::move(d));
}

inline UCenteredMatrix u_center(const DistanceMatrix& d) {
  const std::size_t n = d.n();
  if (n < 3) fail(ErrorKind::size, "U-centering needs n >= 3, got " + std::to_string(n));
  std::vector<double> row_sums(n);
  for (std::size_t i = 0; i < n; ++i) row_sums[i] = pairwise_sum(d.row(i));
  const double total = pairwise_sum(row_sums);
  const double nm2 = static_cast<double>(n - 2);
  const double grand = total / (static_cast<double>(n - 1) * nm2);
  for (auto& s : row_sums) s /= nm2;

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = d(i, j) - row_sums[i] - row_sums[j] + grand;
  return UCenteredMatrix(std::move(a));
}

/// Unbiased estimator of squared distance covariance from two U-centered matrices.
inline DcovStatistic dcov_unbiased(const UCenteredMatrix& a, const UCenteredMatrix& b) {
  const std::size_t n = a.n();
  if (b.n() != n) fail(ErrorKind::dimension, "dcov_unbiased: sizes " + std::to_string(n) + " and " +
                                                 std::to_string(b.n()) + " differ");
  if (n < 4) fail(ErrorKind::size, "dcov_unbiased needs n >= 4, got " + std::to_string(n));
  std::vector<double> partial(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ai = a.row(i);
    const auto bi = b.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += ai[j] * bi[j];
    partial[i] = s;
  }
  const double nn = static_cast<double>(n);
  return {pairwise_sum(partial) / (nn * (nn - 3.0)), n};
}

/// Convenience: dCov^2_n between point sets X (n x p) and scalar sample w.
inline DcovStatistic dcov_unbiased(const Matrix& x, std::span<const double> w) {
  return dcov_unbiased(u_center(pairwise_distances(x)), u_center(pairwise_distances(w)));
}

}  // namespace hetdcov

#endif  // HETDCOV_DCOV_HPP
