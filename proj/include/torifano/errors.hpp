#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace torifano {

enum class ErrorKind {
  NotDelzant,
  Unbounded,
  Empty,
  NotBarycentred,
  BoundaryContact,
  ConvexityLoss,
  NoConvergence,
  TamingFailure,
  SingularMatrix,
  EvaluationFailure,
  StabilityAbort,
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. Carries a machine-readable kind and, for
/// pointwise failures, the coordinates where the failure was detected.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        std::optional<std::vector<double>> where = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }
  const std::optional<std::vector<double>>& where() const noexcept {
    return where_;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
  std::optional<std::vector<double>> where_;
};

}  // namespace torifano
