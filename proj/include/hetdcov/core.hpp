#ifndef HETDCOV_CORE_HPP
#define HETDCOV_CORE_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hetdcov/errors.hpp"
#include "hetdcov/matrix.hpp"

namespace hetdcov {

/// Smallest sample the unbiased distance-covariance estimator accepts.
inline constexpr std::size_t min_sample_size = 4;

/// n observations of (Y, X) with X in R^p.
///
/// Immutable once built. The covariate matrix is shared between datasets that
/// only differ in their response, which is how bootstrap samples are formed.
class Dataset {
 public:
  Dataset(std::vector<double> y, Matrix x) : Dataset(std::move(y), std::make_shared<const Matrix>(std::move(x))) {}

  Dataset(std::vector<double> y, std::shared_ptr<const Matrix> x) : y_(std::move(y)), x_(std::move(x)) {
    if (!x_) fail(ErrorKind::configuration, "dataset without covariates");
    if (x_->rows() != y_.size())
      fail(ErrorKind::dimension, "response has " + std::to_string(y_.size()) + " entries but covariates have " +
                                     std::to_string(x_->rows()) + " rows");
    if (x_->cols() == 0) fail(ErrorKind::dimension, "dataset needs at least one covariate column");
    if (y_.size() < min_sample_size)
      fail(ErrorKind::size, "need n >= " + std::to_string(min_sample_size) + " observations, got " +
                                std::to_string(y_.size()));
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (!std::isfinite(y_[i])) fail(ErrorKind::data, "non-finite response at row " + std::to_string(i));
      for (std::size_t j = 0; j < x_->cols(); ++j)
        if (!std::isfinite((*x_)(i, j)))
          fail(ErrorKind::data, "non-finite covariate at row " + std::to_string(i) + ", column " + std::to_string(j));
    }
  }

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t p() const noexcept { return x_->cols(); }

  std::span<const double> y() const noexcept { return y_; }
  const Matrix& x() const noexcept { return *x_; }
  std::span<const double> x(std::size_t i) const { return x_->row(i); }
  const std::shared_ptr<const Matrix>& shared_x() const noexcept { return x_; }

  /// Same covariates, new response.
  Dataset with_response(std::vector<double> y) const { return Dataset(std::move(y), x_); }

 private:
  std::vector<double> y_;
  std::shared_ptr<const Matrix> x_;
};

enum class ResidualKind { raw_eta_hat, standardized, bootstrap_star };

struct ResidualSet {
  std::vector<double> values;
  ResidualKind kind = ResidualKind::raw_eta_hat;

  std::size_t size() const noexcept { return values.size(); }
};

/// Centers and scales by the 1/n standard deviation, as the residual bootstrap prescribes.
inline ResidualSet standardize_residuals(const ResidualSet& r) {
  const auto n = r.values.size();
  if (n < 2) fail(ErrorKind::degenerate_residuals, "need at least two residuals to standardize");
  const double mean = pairwise_sum(r.values) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (r.values[i] - mean) * (r.values[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(n);
  if (!(var > 0.0) || !std::isfinite(var)) fail(ErrorKind::degenerate_residuals, "residuals have zero variance");
  const double sd = std::sqrt(var);
  ResidualSet out{std::vector<double>(n), ResidualKind::standardized};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = (r.values[i] - mean) / sd;
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a headered CSV and selects the response and covariate columns by name.
inline Dataset read_dataset(std::istream& in, std::string_view y_column, std::span<const std::string> x_columns,
                            std::string_view source = "<stream>") {
  if (x_columns.empty()) fail(ErrorKind::configuration, "no covariate columns requested");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, std::string(source) + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::vector<std::string> names(header.begin(), header.end());

  auto find_column = [&](std::string_view name) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    fail(ErrorKind::configuration, std::string(source) + ": column '" + std::string(name) + "' not found");
  };
  const std::size_t y_idx = find_column(y_column);
  std::vector<std::size_t> x_idx;
  for (const auto& c : x_columns) x_idx.push_back(find_column(c));

  std::vector<double> y;
  std::vector<double> xs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::size_t k) {
      if (k >= cells.size())
        fail(ErrorKind::data, std::string(source) + ": row " + std::to_string(row) + " is missing column '" +
                                  names[k] + "'");
      double v = 0.0;
      if (!detail::parse_double(cells[k], v))
        fail(ErrorKind::data, std::string(source) + ": row " + std::to_string(row) + ", column '" + names[k] +
                                  "': cannot parse '" + std::string(cells[k]) + "' as a finite number");
      return v;
    };
    y.push_back(cell(y_idx));
    for (auto k : x_idx) xs.push_back(cell(k));
  }
  const std::size_t n = y.size();
  if (n < min_sample_size)
    fail(ErrorKind::size, std::string(source) + ": need at least " + std::to_string(min_sample_size) +
                              " data rows, found " + std::to_string(n));
  return Dataset(std::move(y), Matrix(n, x_idx.size(), std::move(xs)));
}

inline Dataset load_dataset(const std::string& path, std::string_view y_column, std::span<const std::string> x_columns) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::configuration, "cannot open '" + path + "'");
  return read_dataset(in, y_column, x_columns, path);
}

/// Writes `y,x1,...,xp` (or the given names) with shortest round-trip formatting.
inline void write_dataset(std::ostream& out, const Dataset& ds, std::string_view y_name = "y",
                          std::span<const std::string> x_names = {}) {
  out << y_name;
  for (std::size_t j = 0; j < ds.p(); ++j)
    out << ',' << (j < x_names.size() ? x_names[j] : "x" + std::to_string(j + 1));
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << detail::format_double(ds.y()[i]);
    for (double v : ds.x(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

}  // namespace hetdcov

#endif  // HETDCOV_CORE_HPP
