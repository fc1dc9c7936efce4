#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "torifano/errors.hpp"
#include "torifano/geometry.hpp"
#include "torifano/polytope.hpp"
#include "torifano/potential.hpp"

namespace torifano {

enum class Scheme { ExplicitEuler, Heun };
enum class Normalization { None, AffineAtBarycenter };

struct FlowConfig {
  /// Fixed step; empty means "auto" (0.25 h^2 / (m |X|_op), re-estimated
  /// every dt_refresh steps, one halving retry on StabilityAbort).
  std::optional<double> dt;
  double t_end = 1.0;
  Scheme scheme = Scheme::Heun;
  int resolution = 101;
  double margin = 1.5;
  Normalization normalization = Normalization::AffineAtBarycenter;
  /// Observable spacing in flow time; the stepper lands exactly on k * cadence.
  double cadence = 0.1;
  /// Abort when sup |normalized RHS| exceeds this (or is not finite).
  double safeguard = 1e3;
  double cfl = 0.25;
  int dt_refresh = 50;
  /// Resolution of the polytope quadrature used for the Mabuchi energy.
  int quadrature_resolution = 16;
  /// Skip the Mabuchi/kappa observables (cheap runs).
  bool light_observables = false;

  void validate() const;
};

/// Time-independent per-node data for the RHS: coordinates, Hess u_c and
/// the constant sum_k log L_k - sum_k (L_k - 1).
struct NodeCache {
  std::vector<Vec> x;
  std::vector<Mat> hess_c;
  std::vector<double> log_term;

  static std::shared_ptr<const NodeCache> build(const DelzantPolytope& p,
                                                const InteriorGrid& grid);
};

/// Flow state. B_t and A_t are always recomputed as e^{-2t} times the
/// frozen initial pair.
struct FlowState {
  double t = 0.0;
  long step = 0;
  double dt = 0.0;  // current step estimate (auto mode)
  SymplecticPotential potential;
  DeformationPair D0;
  std::shared_ptr<const NodeCache> cache;
  /// RHS at `potential` when already known (filled by step()).
  std::shared_ptr<const std::vector<double>> rhs;

  Mat B() const { return decayed(D0.B, t); }
  Mat A() const { return decayed(D0.A, t); }

  /// Grid state from an analytic initial smooth part.
  static FlowState initial(std::shared_ptr<const DelzantPolytope> p,
                           const DeformationPair& d0, const SmoothPart& v0,
                           int resolution, double margin = 1.5);
  /// Grid state from explicit node values.
  static FlowState from_values(std::shared_ptr<const DelzantPolytope> p,
                               const DeformationPair& d0,
                               std::vector<double> values, int resolution,
                               double margin, double t, long step, double dt);
};

/// 2 h_{u,B_t} at every active node (regularized form). Throws
/// ConvexityLoss / TamingFailure with the node attached.
std::vector<double> flow_rhs(const FlowState& state);

/// Largest step allowed by the explicit stability estimate.
double stable_dt(const FlowState& state, double cfl);

/// One time step of size dt (the state's own dt if dt <= 0).
FlowState step(const FlowState& state, const FlowConfig& cfg, double dt = 0.0);

struct ObservableRecord {
  double t = 0.0;
  double mabuchi = 0.0;
  double sup_b_sq = 0.0;
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  double rhs_sup = 0.0;
  double norm_change = 0.0;
};

/// Node values of the reported potential: v minus the affine part of
/// u at the barycenter (or v itself without normalization).
std::vector<double> reported_values(const FlowState& state, Normalization n);

/// sup |RHS| after removing the constant that the affine normalization
/// absorbs (RHS(u + c + <xi, x>) = RHS(u) + 2c).
double normalized_rhs_sup(const FlowState& state, const std::vector<double>& rhs,
                          Normalization n);

/// sup over nodes of |reported u - u_c| (u_c normalized the same way).
double distance_to_canonical(const FlowState& state, Normalization n);

struct RunResult {
  std::vector<ObservableRecord> series;
  FlowState final_state;
  std::optional<Error> failure;
  double failure_t = 0.0;
  /// max over steps of sup |u_dot| e^{-2t}.
  double growth_envelope = 0.0;
  /// Step size in effect at the end (after any auto retry).
  double dt_used = 0.0;
  long steps = 0;
  bool retried = false;
};

using Observer = std::function<void(const FlowState&, const ObservableRecord&)>;

/// Integrates to cfg.t_end, recording observables at every multiple of the
/// cadence (and at t_end). Failures are returned, not thrown.
RunResult run(const FlowState& init, const FlowConfig& cfg,
              const Observer& observer = {});

/// Observables at one state (previous reported values for norm_change).
ObservableRecord observe(const FlowState& state, const FlowConfig& cfg,
                         const std::vector<double>& rhs,
                         const std::vector<double>* previous_reported);

/// max_y |phi_dot - log det((Hess phi)^{-1} + iB_t)^{-1} - 2 phi| with
/// phi_dot = -RHS(x(y)).
double phi_equation_residual(const FlowState& state,
                             const std::vector<double>& rhs,
                             const std::vector<Vec>& sample_y);

/// Snapshot serialization (JSON text, versioned, exact doubles).
std::string snapshot_to_json(const FlowState& state);
FlowState snapshot_from_json(const std::string& text);

}  // namespace torifano
