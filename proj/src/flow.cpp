#include "torifano/flow.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "json.hpp"
#include "torifano/functionals.hpp"
#include "torifano/parallel.hpp"

namespace torifano {

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::ConfigError, what);
}

// Explicit RK2/Euler stability limit for the fourth-order second-difference
// operator: |lambda| h^2 <= (16/3) m |X|, stable for dt |lambda| <= 2.
constexpr double kStabilityLimit = 0.375;

double sup_abs(const std::vector<double>& f) {
  double s = 0.0;
  for (double v : f) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    s = std::max(s, std::abs(v));
  }
  return s;
}

Vec canonical_gradient_at_barycenter(const DelzantPolytope& p) {
  Vec g = Vec::Zero(p.dim());
  for (std::size_t j = 0; j < p.num_labels(); ++j) g += 0.5 * p.normal(j);
  return g;
}

double op_norm_sym(const Mat& x) {
  if (x.rows() == 1) return std::abs(x(0, 0));
  if (x.rows() == 2) {
    const double tr = 0.5 * (x(0, 0) + x(1, 1));
    const double d = 0.5 * (x(0, 0) - x(1, 1));
    const double r = std::sqrt(d * d + x(0, 1) * x(0, 1));
    return std::max(std::abs(tr + r), std::abs(tr - r));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool positive_definite(const Mat& g) {
  switch (g.rows()) {
    case 1:
      return g(0, 0) > 0.0;
    case 2:
      return g(0, 0) > 0.0 && g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) > 0.0;
    default: {
      Eigen::LLT<Mat> llt(g);
      return llt.info() == Eigen::Success;
    }
  }
}

}  // namespace

void FlowConfig::validate() const {
  if (dt && !(*dt > 0.0)) config_error("flow.dt must be positive or \"auto\"");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) config_error("flow.t_end must be >= 0");
  if (resolution < 8) config_error("grid resolution must be >= 8");
  if (!(margin > 0.0)) config_error("grid margin must be positive");
  if (!(cadence > 0.0)) config_error("flow.cadence must be positive");
  if (!(safeguard > 0.0)) config_error("flow.safeguard must be positive");
  if (!(cfl > 0.0)) config_error("flow.cfl must be positive");
  if (dt_refresh < 1) config_error("flow.dt_refresh must be >= 1");
  if (quadrature_resolution < 8) config_error("flow.quadrature_resolution must be >= 8");
}

std::shared_ptr<const NodeCache> NodeCache::build(const DelzantPolytope& p,
                                                  const InteriorGrid& grid) {
  auto c = std::make_shared<NodeCache>();
  const std::size_t n = grid.num_active();
  c->x.resize(n);
  c->hess_c.resize(n);
  c->log_term.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec x = grid.active_coords(k);
    double sum_log = 0.0, sum_lm1 = 0.0;
    for (std::size_t j = 0; j < p.num_labels(); ++j) {
      const double l = p.L(j, x);
      sum_log += std::log(l);
      sum_lm1 += l - 1.0;
    }
    c->x[k] = x;
    c->hess_c[k] = canonical_potential(p, x).hess;
    c->log_term[k] = sum_log - sum_lm1;
  }
  return c;
}

FlowState FlowState::from_values(std::shared_ptr<const DelzantPolytope> p,
                                 const DeformationPair& d0,
                                 std::vector<double> values, int resolution,
                                 double margin, double t, long step, double dt) {
  if (!p->barycentred()) {
    throw Error(ErrorKind::NotBarycentred, "the flow needs a barycentred polytope");
  }
  if (d0.dim() != p->dim()) {
    throw Error(ErrorKind::InvalidArgument, "deformation pair has the wrong dimension");
  }
  auto grid = std::make_shared<const InteriorGrid>(*p, resolution, margin);
  FlowState s;
  s.t = t;
  s.step = step;
  s.dt = dt;
  s.D0 = d0;
  s.cache = NodeCache::build(*p, *grid);
  s.potential = SymplecticPotential::on_grid(std::move(p), std::move(grid), std::move(values));
  return s;
}

FlowState FlowState::initial(std::shared_ptr<const DelzantPolytope> p,
                             const DeformationPair& d0, const SmoothPart& v0,
                             int resolution, double margin) {
  const InteriorGrid grid(*p, resolution, margin);
  std::vector<double> values(grid.num_active());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = v0(grid.active_coords(k)).value;
  return from_values(std::move(p), d0, std::move(values), resolution, margin, 0.0, 0, 0.0);
}

std::vector<double> flow_rhs(const FlowState& state) {
  if (state.rhs) return *state.rhs;
  const SymplecticPotential& s = state.potential;
  const auto& jets = s.node_jets();
  const NodeCache& c = *state.cache;
  const Mat b = state.B();
  std::vector<double> out(jets.size());
  parallel_for(out.size(), [&](std::size_t k) {
    const Jet& v = jets[k];
    const Mat g = c.hess_c[k] + v.hess;
    if (!positive_definite(g)) {
      throw Error(ErrorKind::ConvexityLoss, "Hess u is not positive definite", to_std(c.x[k]));
    }
    double logdet;
    try {
      logdet = hermitian_logdet(g, b);
    } catch (const Error& e) {
      throw Error(e.kind(), e.what(), to_std(c.x[k]));
    }
    const double h = 0.5 * (c.log_term[k] + logdet) + v.value - c.x[k].dot(v.grad);
    out[k] = 2.0 * h;
  });
  return out;
}

double stable_dt(const FlowState& state, double cfl) {
  const auto& jets = state.potential.node_jets();
  const NodeCache& c = *state.cache;
  const Mat b = state.B();
  double x_max = 0.0;
  for (std::size_t k = 0; k < jets.size(); ++k) {
    const Mat g = c.hess_c[k] + jets[k].hess;
    x_max = std::max(x_max, op_norm_sym(hermitian_inverse(g, b).X));
  }
  const double h = state.potential.grid().h();
  return cfl * h * h / (state.potential.dim() * x_max);
}

namespace {

FlowState advance(const FlowState& state, std::vector<double> values, double t_new) {
  FlowState next;
  next.t = t_new;
  next.step = state.step + 1;
  next.dt = state.dt;
  next.D0 = state.D0;
  next.cache = state.cache;
  next.potential = state.potential.with_values(std::move(values));
  return next;
}

double affine_constant(const FlowState& state, Normalization n) {
  if (n == Normalization::None) return 0.0;
  return state.potential.eval_v(Vec::Zero(state.potential.dim())).value;
}

FlowState step_impl(const FlowState& state, const FlowConfig& cfg, double dt,
                    double t_new) {
  const std::vector<double> r0 = flow_rhs(state);
  const std::vector<double>& v = state.potential.values();
  const std::size_t n = v.size();

  std::vector<double> v1(n);
  for (std::size_t k = 0; k < n; ++k) v1[k] = v[k] + dt * r0[k];
  FlowState next = advance(state, std::move(v1), t_new);
  if (cfg.scheme == Scheme::Heun) {
    const std::vector<double> rp = flow_rhs(next);
    std::vector<double> v2(n);
    for (std::size_t k = 0; k < n; ++k) v2[k] = v[k] + 0.5 * dt * (r0[k] + rp[k]);
    next = advance(state, std::move(v2), t_new);
  }
  // Post-step check: convexity and taming at every node, RHS cached for
  // the next step.
  auto r = std::make_shared<const std::vector<double>>(flow_rhs(next));
  const double sup = normalized_rhs_sup(next, *r, cfg.normalization);
  if (!(sup <= cfg.safeguard)) {
    throw Error(ErrorKind::StabilityAbort,
                "RHS sup-norm " + std::to_string(sup) + " exceeds the safeguard");
  }
  next.rhs = std::move(r);
  return next;
}

// Convexity or taming loss after a step beyond the explicit bound is an
// instability of the scheme, not of the flow.
[[noreturn]] void rethrow_classified(const Error& e, const FlowState& before, double dt) {
  if ((e.kind() == ErrorKind::ConvexityLoss || e.kind() == ErrorKind::TamingFailure) &&
      dt > stable_dt(before, kStabilityLimit)) {
    throw Error(ErrorKind::StabilityAbort,
                e.detail() + " (step exceeds the explicit stability bound)", e.where());
  }
  throw e;
}

// t_new is passed separately so that sample times can be hit exactly.
FlowState step_to(const FlowState& state, const FlowConfig& cfg, double dt,
                  double t_new) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "step size must be positive");
  try {
    return step_impl(state, cfg, dt, t_new);
  } catch (const Error& e) {
    rethrow_classified(e, state, dt);
  }
}

}  // namespace

FlowState step(const FlowState& state, const FlowConfig& cfg, double dt) {
  if (dt <= 0.0) dt = state.dt;
  return step_to(state, cfg, dt, state.t + dt);
}

std::vector<double> reported_values(const FlowState& state, Normalization n) {
  const std::vector<double>& v = state.potential.values();
  if (n == Normalization::None) return v;
  const int m = state.potential.dim();
  const Jet j0 = state.potential.eval_v(Vec::Zero(m));
  const Vec grad_u0 = canonical_gradient_at_barycenter(state.potential.polytope()) + j0.grad;
  const NodeCache& c = *state.cache;
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] - j0.value - grad_u0.dot(c.x[k]);
  return out;
}

double normalized_rhs_sup(const FlowState& state, const std::vector<double>& rhs,
                          Normalization n) {
  const double shift = 2.0 * affine_constant(state, n);
  double s = 0.0;
  for (double r : rhs) {
    const double d = r - shift;
    if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
    s = std::max(s, std::abs(d));
  }
  return s;
}

double distance_to_canonical(const FlowState& state, Normalization n) {
  const std::vector<double> rep = reported_values(state, n);
  if (n == Normalization::None) return sup_abs(rep);
  // The normalized Guillemin potential is u_c - <grad u_c(0), x>.
  const Vec gc = canonical_gradient_at_barycenter(state.potential.polytope());
  const NodeCache& c = *state.cache;
  double s = 0.0;
  for (std::size_t k = 0; k < rep.size(); ++k) {
    s = std::max(s, std::abs(rep[k] + gc.dot(c.x[k])));
  }
  return s;
}

namespace {

struct ObservationContext {
  PolytopeQuadrature quadrature;
  SymplecticPotential reference;
  std::vector<double> futaki_linear;  // F(x_i)
};

ObservationContext make_context(const FlowState& state, const FlowConfig& cfg) {
  const auto& p = state.potential.polytope_ptr();
  ObservationContext ctx{build_quadrature(*p, cfg.quadrature_resolution),
                         SymplecticPotential::canonical(p), {}};
  for (int i = 0; i < p->dim(); ++i) {
    ctx.futaki_linear.push_back(
        futaki(*p, ctx.quadrature, [i](const Vec& x) { return x(i); }));
  }
  return ctx;
}

ObservableRecord observe_with(const FlowState& state, const FlowConfig& cfg,
                              const std::vector<double>& rhs,
                              const std::vector<double>* previous,
                              const std::vector<double>& reported,
                              const ObservationContext* ctx) {
  ObservableRecord rec;
  rec.t = state.t;
  const SymplecticPotential& s = state.potential;
  const Mat b = state.B();
  const int m = s.dim();

  const auto& jets = s.node_jets();
  const NodeCache& c = *state.cache;
  for (std::size_t k = 0; k < jets.size(); ++k) {
    const Mat g = c.hess_c[k] + jets[k].hess;
    rec.sup_b_sq = std::max(rec.sup_b_sq, b_norm_sq(g.inverse(), b));
  }
  rec.rhs_sup = normalized_rhs_sup(state, rhs, cfg.normalization);
  if (previous) {
    for (std::size_t k = 0; k < reported.size(); ++k) {
      rec.norm_change = std::max(rec.norm_change, std::abs(reported[k] - (*previous)[k]));
    }
  }
  if (!ctx) return rec;

  const auto kappa = gen_scalar_curvature(s, b, s.grid());
  rec.kappa_min = std::numeric_limits<double>::infinity();
  rec.kappa_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < kappa.size(); ++k) {
    if (s.grid().stencil_depth(k) < 2) continue;
    rec.kappa_min = std::min(rec.kappa_min, kappa[k]);
    rec.kappa_max = std::max(rec.kappa_max, kappa[k]);
  }

  // M(u) = M(u~) + F(<xi, x>) for u = u~ + c + <xi, x>, evaluated on the
  // normalized potential to keep the growing constant mode out of the sum.
  if (cfg.normalization == Normalization::AffineAtBarycenter) {
    const Jet j0 = s.eval_v(Vec::Zero(m));
    const Vec xi = canonical_gradient_at_barycenter(s.polytope()) + j0.grad;
    const SymplecticPotential normalized = s.with_values(reported);
    rec.mabuchi = mabuchi_energy(normalized, b, ctx->reference, ctx->quadrature).mabuchi;
    for (int i = 0; i < m; ++i) rec.mabuchi += xi(i) * ctx->futaki_linear[static_cast<std::size_t>(i)];
  } else {
    rec.mabuchi = mabuchi_energy(s, b, ctx->reference, ctx->quadrature).mabuchi;
  }
  return rec;
}

}  // namespace

ObservableRecord observe(const FlowState& state, const FlowConfig& cfg,
                         const std::vector<double>& rhs,
                         const std::vector<double>* previous_reported) {
  const std::vector<double> rep = reported_values(state, cfg.normalization);
  if (cfg.light_observables) {
    return observe_with(state, cfg, rhs, previous_reported, rep, nullptr);
  }
  const ObservationContext ctx = make_context(state, cfg);
  return observe_with(state, cfg, rhs, previous_reported, rep, &ctx);
}

namespace {

RunResult run_once(const FlowState& init, const FlowConfig& cfg, double cfl,
                   const Observer& observer) {
  RunResult res;
  FlowState state = init;
  const bool auto_dt = !cfg.dt.has_value();
  std::optional<ObservationContext> ctx;
  if (!cfg.light_observables) ctx = make_context(state, cfg);

  try {
    if (auto_dt) {
      if (!(state.dt > 0.0)) state.dt = stable_dt(state, cfl);
    } else {
      state.dt = *cfg.dt;
    }
    if (!state.rhs) state.rhs = std::make_shared<const std::vector<double>>(flow_rhs(state));
  } catch (const Error& e) {
    res.failure = e;
    res.failure_t = state.t;
    res.final_state = state;
    return res;
  }

  std::vector<double> reported = reported_values(state, cfg.normalization);
  auto record = [&](const FlowState& st, const std::vector<double>* prev,
                    const std::vector<double>& rep) {
    const ObservableRecord rec =
        observe_with(st, cfg, *st.rhs, prev, rep, ctx ? &*ctx : nullptr);
    res.series.push_back(rec);
    if (observer) observer(st, rec);
  };
  auto envelope = [&](const FlowState& st) {
    res.growth_envelope = std::max(res.growth_envelope, sup_abs(*st.rhs) * std::exp(-2.0 * st.t));
  };

  try {
    record(state, nullptr, reported);
    envelope(state);
    long sample = static_cast<long>(std::floor(state.t / cfg.cadence + 1e-9)) + 1;
    while (state.t < cfg.t_end) {
      const double target = std::min(static_cast<double>(sample) * cfg.cadence, cfg.t_end);
      if (auto_dt && state.step > 0 && state.step % cfg.dt_refresh == 0) {
        state.dt = stable_dt(state, cfl);
      }
      double dt = state.dt;
      bool landing = false;
      if (state.t + dt >= target - 1e-12 * std::max(1.0, target)) {
        dt = target - state.t;
        landing = true;
      }
      const FlowState before = std::exchange(state, step_to(state, cfg, dt, landing ? target : state.t + dt));
      envelope(state);
      if (landing) {
        std::vector<double> rep = reported_values(state, cfg.normalization);
        try {
          record(state, &reported, rep);
        } catch (const Error& e) {
          // The landing step may be a short remainder; judge the nominal one.
          rethrow_classified(e, before, std::max(dt, before.dt));
        }
        reported = std::move(rep);
        ++sample;
        if (target >= cfg.t_end) break;
      }
    }
  } catch (const Error& e) {
    res.failure = Error(e.kind(), e.detail() + " (t = " + std::to_string(state.t) + ")",
                        e.where());
    res.failure_t = state.t;
  }
  res.final_state = state;
  res.dt_used = state.dt;
  res.steps = state.step;
  return res;
}

}  // namespace

RunResult run(const FlowState& init, const FlowConfig& cfg, const Observer& observer) {
  cfg.validate();
  RunResult res = run_once(init, cfg, cfg.cfl, observer);
  if (!cfg.dt && res.failure && res.failure->kind() == ErrorKind::StabilityAbort) {
    FlowState restart = init;
    restart.dt = 0.0;
    restart.rhs.reset();
    res = run_once(restart, cfg, 0.5 * cfg.cfl, observer);
    res.retried = true;
  }
  return res;
}

double phi_equation_residual(const FlowState& state, const std::vector<double>& rhs,
                             const std::vector<Vec>& sample_y) {
  const SymplecticPotential& s = state.potential;
  const Mat b = state.B();
  double worst = 0.0;
  for (const Vec& y : sample_y) {
    const LegendrePoint lp = legendre_solve(s, y);
    const double u_dot = interpolation_stencil(s.grid(), lp.x).apply(rhs);
    const double phi_dot = -u_dot;
    const double residual = phi_dot - phi_side_logdet(lp.hess_phi, b) - 2.0 * lp.phi;
    worst = std::max(worst, std::abs(residual));
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const json& j, int m) {
  Mat out(m, m);
  if (!j.is_array() || static_cast<int>(j.size()) != m) {
    throw Error(ErrorKind::ConfigError, "snapshot matrix has the wrong shape");
  }
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) out(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  }
  return out;
}

constexpr int kSnapshotVersion = 1;

}  // namespace

std::string snapshot_to_json(const FlowState& state) {
  const SymplecticPotential& s = state.potential;
  const InteriorGrid& g = s.grid();
  json j;
  j["format"] = "torifano-snapshot";
  j["version"] = kSnapshotVersion;
  j["t"] = state.t;
  j["step"] = state.step;
  j["dt"] = state.dt;
  json labels = json::array();
  for (const auto& l : s.polytope().labels()) {
    labels.push_back({{"normal", l.normal}, {"offset", l.offset}});
  }
  j["polytope"] = {{"labels", labels}};
  json counts = json::array();
  for (int a = 0; a < g.dim(); ++a) counts.push_back(g.count(a));
  j["grid"] = {{"resolution", g.resolution()},
               {"margin", g.margin()},
               {"h", g.h()},
               {"lo", to_std(g.lo())},
               {"counts", counts},
               {"num_active", g.num_active()},
               {"ordering", "row-major over active nodes"}};
  j["A0"] = mat_to_json(state.D0.A);
  j["B0"] = mat_to_json(state.D0.B);
  j["values"] = s.values();
  return j.dump(1);
}

FlowState snapshot_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("snapshot is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "torifano-snapshot") {
      throw Error(ErrorKind::ConfigError, "not a snapshot file");
    }
    if (j.at("version").get<int>() != kSnapshotVersion) {
      throw Error(ErrorKind::ConfigError, "unsupported snapshot version");
    }
    std::vector<Label> labels;
    for (const auto& l : j.at("polytope").at("labels")) {
      labels.push_back({l.at("normal").get<std::vector<int>>(), l.at("offset").get<double>()});
    }
    auto p = std::make_shared<const DelzantPolytope>(DelzantPolytope::build(labels, false));
    const int m = p->dim();
    const auto d0 = DeformationPair::make(mat_from_json(j.at("A0"), m), mat_from_json(j.at("B0"), m));
    const auto& g = j.at("grid");
    FlowState s = FlowState::from_values(
        p, d0, j.at("values").get<std::vector<double>>(), g.at("resolution").get<int>(),
        g.at("margin").get<double>(), j.at("t").get<double>(), j.at("step").get<long>(),
        j.at("dt").get<double>());
    if (s.potential.grid().h() != g.at("h").get<double>() ||
        s.potential.grid().num_active() != g.at("num_active").get<std::size_t>()) {
      throw Error(ErrorKind::ConfigError, "snapshot grid metadata does not match");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed snapshot: ") + e.what());
  }
}

}  // namespace torifano
