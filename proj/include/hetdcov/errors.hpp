#ifndef HETDCOV_ERRORS_HPP
#define HETDCOV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hetdcov {

enum class ErrorKind {
  configuration,
  data,
  size,
  dimension,
  degenerate_residuals,
  rank_deficiency,
  isolated_point,
  family_evaluation,
  calibration,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::data: return "data";
    case ErrorKind::size: return "size";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::degenerate_residuals: return "degenerate-residuals";
    case ErrorKind::rank_deficiency: return "rank-deficiency";
    case ErrorKind::isolated_point: return "isolated-point";
    case ErrorKind::family_evaluation: return "family-evaluation";
    case ErrorKind::calibration: return "calibration";
  }
  return "unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hetdcov

#endif  // HETDCOV_ERRORS_HPP
