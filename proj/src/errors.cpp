#include "torifano/errors.hpp"

namespace torifano {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotDelzant: return "NotDelzant";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::NotBarycentred: return "NotBarycentred";
    case ErrorKind::BoundaryContact: return "BoundaryContact";
    case ErrorKind::ConvexityLoss: return "ConvexityLoss";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::TamingFailure: return "TamingFailure";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::EvaluationFailure: return "EvaluationFailure";
    case ErrorKind::StabilityAbort: return "StabilityAbort";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what,
             std::optional<std::vector<double>> where)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what),
      kind_(kind),
      detail_(what),
      where_(std::move(where)) {}

}  // namespace torifano
