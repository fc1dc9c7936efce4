#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "torifano/flow.hpp"

namespace torifano::cli {

/// Initial perturbation v0: "zero", a bump, or a polynomial.
struct PerturbationSpec {
  enum class Kind { Zero, Bump, Polynomial };
  Kind kind = Kind::Zero;
  std::vector<double> center;  // bump; empty means the barycenter
  double amplitude = 0.0;
  double width = 1.0;
  std::map<std::vector<int>, double> coefficients;

  SmoothPart build(int m) const;
  nlohmann::json to_json() const;
};

struct RunConfig {
  std::optional<std::string> preset;  // set, or labels are
  std::vector<Label> labels;
  std::vector<std::vector<double>> A;  // empty means zero
  std::vector<std::vector<double>> B;
  PerturbationSpec v0;
  int resolution = 101;
  double margin = 1.5;
  FlowConfig flow;
  /// Snapshot spacing in flow time; 0 means the observable cadence.
  double snapshot_cadence = 0.0;
  int functionals_quadrature = 64;
  std::vector<std::vector<double>> transform_y;
  std::string out_dir = "torifano-out";

  /// Effective FlowConfig (grid fields copied in).
  FlowConfig flow_config() const;
  nlohmann::json to_json() const;
};

/// Throws Error(ConfigError) naming the offending field, e.g.
/// "polytope.labels[1].normal".
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(const std::string& text);

/// Builds the polytope (NotDelzant etc. propagate) and the deformation
/// pair (InvalidArgument on shape or skew violations).
std::shared_ptr<const DelzantPolytope> build_polytope(const RunConfig& c);
DeformationPair build_deformation(const RunConfig& c, int m);

}  // namespace torifano::cli
