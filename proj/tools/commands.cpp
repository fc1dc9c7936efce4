#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "torifano/functionals.hpp"
#include "torifano/parallel.hpp"

namespace torifano::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string point(const std::vector<double>& x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + ")";
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
  f << text;
}

struct Check {
  std::string name;
  bool ok = true;
  std::string detail;
};

// The setup checks shared by validate, flow and functionals. Hessians come
// from the grid potential that the flow would start from.
std::vector<Check> setup_checks(const SymplecticPotential& s, const DeformationPair& d,
                                std::uint64_t seed) {
  std::vector<Check> checks;
  const InteriorGrid& grid = s.grid();
  const std::size_t n = grid.num_active();

  Check convex{"convexity", true, ""};
  double min_eig = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  std::vector<Mat> hess(n);
  for (std::size_t k = 0; k < n; ++k) {
    hess[k] = s.node_u(k).hess;
    const double e = Eigen::SelfAdjointEigenSolver<Mat>(hess[k], Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .minCoeff();
    if (e < min_eig) {
      min_eig = e;
      worst = k;
    }
  }
  convex.ok = min_eig > 0.0;
  convex.detail = "min eigenvalue of Hess u " + fmt(min_eig) + " at " +
                  point(to_std(grid.active_coords(worst)));
  checks.push_back(convex);

  Check taming{"taming", true, ""};
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  std::size_t tworst = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const TamingResult t = taming_check(hess[k], d.B);
    if (t.min_eigenvalue < tmin) {
      tmin = t.min_eigenvalue;
      tworst = k;
    }
    tmax = std::max(tmax, t.max_eigenvalue);
    if (!t.ok) taming.ok = false;
  }
  taming.detail = "eigenvalues of [[G, B], [-B, G]] in [" + fmt(tmin) + ", " + fmt(tmax) +
                  "], minimum at " + point(to_std(grid.active_coords(tworst)));
  if (!taming.ok) taming.detail = "taming failure at " + point(to_std(grid.active_coords(tworst))) +
                                  ": " + taming.detail;
  checks.push_back(taming);

  Check ident{"matrix identities", true, ""};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double worst_res = 0.0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t k = pick(rng);
    if (!convex.ok) break;
    worst_res = std::max(worst_res, matrix_identity_suite(hess[k] + d.A));
    if (taming.ok) {
      const MetricBlocks mb = metric_blocks(hess[k], d);
      worst_res = std::max(worst_res, (mb.g - mb.g_factored).norm());
      worst_res = std::max(worst_res, (mb.I.transpose() * mb.g * mb.I - mb.g).norm());
    }
  }
  ident.ok = convex.ok && worst_res < 1e-10;
  ident.detail = "max residual " + fmt(worst_res) + " at 10 random nodes (seed " +
                 std::to_string(seed) + ")";
  checks.push_back(ident);
  return checks;
}

struct Setup {
  std::shared_ptr<const DelzantPolytope> polytope;
  DeformationPair d0;
  FlowState state;
};

Setup make_setup(const RunConfig& c) {
  Setup s;
  s.polytope = build_polytope(c);
  s.d0 = build_deformation(c, s.polytope->dim());
  const SmoothPart v0 = c.v0.build(s.polytope->dim());
  if (!s.polytope->barycentred()) {
    throw Error(ErrorKind::NotBarycentred, "the flow needs a barycentred polytope (all offsets 1)");
  }
  s.state = FlowState::initial(s.polytope, s.d0, v0, c.resolution, c.margin);
  return s;
}

// Runs the setup checks quietly; returns the first failure.
std::optional<Check> first_failed(const Setup& s, std::uint64_t seed) {
  for (const Check& ch : setup_checks(s.state.potential, s.d0, seed)) {
    if (!ch.ok) return ch;
  }
  return std::nullopt;
}

json error_json(const Error& e) {
  json j = {{"kind", std::string(to_string(e.kind()))}, {"message", e.detail()}};
  if (e.where()) j["where"] = *e.where();
  return j;
}

bool non_increasing(const std::vector<ObservableRecord>& series,
                    double ObservableRecord::*field) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double prev = series[i - 1].*field;
    if (series[i].*field > prev + 1e-6 * (1.0 + std::abs(prev))) return false;
  }
  return true;
}

std::vector<Vec> residual_samples(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> ys;
  for (int i = 0; i < 10; ++i) {
    Vec y(m);
    for (int a = 0; a < m; ++a) y(a) = u(rng);
    ys.push_back(y);
  }
  return ys;
}

}  // namespace

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigError:
      return kConfigError;
    case ErrorKind::NotDelzant:
    case ErrorKind::Unbounded:
    case ErrorKind::Empty:
    case ErrorKind::NotBarycentred:
    case ErrorKind::InvalidArgument:
      return kValidationFailure;
    default:
      return kRuntimeFailure;
  }
}

std::string describe(const Error& e) {
  std::string s = e.what();
  if (e.where()) s += " at " + point(*e.where());
  return s;
}

int cmd_validate(const RunConfig& c, const Options& o, std::ostream& out) {
  std::shared_ptr<const DelzantPolytope> p;
  try {
    p = build_polytope(c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    out << "FAIL polytope: " << describe(e) << "\n";
    return kValidationFailure;
  }
  out << "PASS polytope: m = " << p->dim() << ", " << p->num_labels() << " labels, "
      << p->vertices().size() << " vertices" << (p->barycentred() ? ", barycentred" : "")
      << "\n";
  if (!p->barycentred()) {
    out << "FAIL potential: the flow needs a barycentred polytope (all offsets 1)\n";
    return kValidationFailure;
  }

  Setup s;
  try {
    s = make_setup(c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    out << "FAIL potential: " << describe(e) << "\n";
    return kValidationFailure;
  }
  out << "PASS potential: " << s.state.potential.grid().num_active() << " active nodes, h = "
      << fmt(s.state.potential.grid().h()) << "\n";

  bool ok = true;
  for (const Check& ch : setup_checks(s.state.potential, s.d0, o.seed)) {
    out << (ch.ok ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
    ok = ok && ch.ok;
  }
  return ok ? kOk : kValidationFailure;
}

int cmd_flow(const RunConfig& c, const Options& o, std::ostream& out) {
  const FlowConfig cfg = c.flow_config();
  cfg.validate();

  FlowState init;
  if (o.resume) {
    std::ifstream f(*o.resume, std::ios::binary);
    if (!f) throw Error(ErrorKind::ConfigError, "--resume: cannot read " + *o.resume);
    std::stringstream ss;
    ss << f.rdbuf();
    init = snapshot_from_json(ss.str());
  } else {
    const Setup s = make_setup(c);
    if (auto bad = first_failed(s, o.seed)) {
      out << "FAIL " << bad->name << ": " << bad->detail << "\n";
      return kValidationFailure;
    }
    init = s.state;
  }

  const fs::path dir(c.out_dir);
  fs::create_directories(dir / "snapshots");
  std::ofstream csv(dir / "observables.csv", std::ios::binary);
  if (!csv) throw Error(ErrorKind::ConfigError, "cannot write " + (dir / "observables.csv").string());
  csv << "t,mabuchi,sup_b_sq,kappa_min,kappa_max,rhs_sup,norm_change\n";

  const double snap_every = c.snapshot_cadence > 0.0 ? c.snapshot_cadence : cfg.cadence;
  auto observer = [&](const FlowState& st, const ObservableRecord& r) {
    csv << fmt(r.t) << ',' << fmt(r.mabuchi) << ',' << fmt(r.sup_b_sq) << ',' << fmt(r.kappa_min)
        << ',' << fmt(r.kappa_max) << ',' << fmt(r.rhs_sup) << ',' << fmt(r.norm_change) << '\n';
    const double k = std::round(st.t / snap_every);
    if (std::abs(st.t - k * snap_every) <= 1e-9 * std::max(1.0, st.t) || st.t >= cfg.t_end) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%08ld.json", st.step);
      write_file(dir / "snapshots" / name, snapshot_to_json(st));
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run(init, cfg, observer);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  csv.close();

  json summary;
  summary["config"] = c.to_json();
  if (o.resume) summary["resumed_from"] = *o.resume;
  summary["seed"] = o.seed;
  summary["status"] = r.failure ? "failed" : "ok";
  if (r.failure) {
    summary["error"] = error_json(*r.failure);
    summary["error"]["t"] = r.failure_t;
  }
  summary["t_final"] = r.final_state.t;
  summary["steps"] = r.steps;
  summary["dt_final"] = r.dt_used;
  summary["retried"] = r.retried;
  summary["samples"] = r.series.size();
  summary["monotone"] = non_increasing(r.series, &ObservableRecord::mabuchi);
  summary["sup_b_sq_monotone"] = non_increasing(r.series, &ObservableRecord::sup_b_sq);
  summary["growth_envelope"] = r.growth_envelope;
  if (!r.series.empty()) {
    const ObservableRecord& last = r.series.back();
    summary["final_mabuchi"] = last.mabuchi;
    summary["final_sup_b_sq"] = last.sup_b_sq;
    summary["final_rhs_sup"] = last.rhs_sup;
    summary["final_kappa_range"] = {last.kappa_min, last.kappa_max};
  }
  summary["distance_to_canonical"] = distance_to_canonical(r.final_state, cfg.normalization);
  try {
    summary["phi_equation_residual"] = phi_equation_residual(
        r.final_state, flow_rhs(r.final_state),
        residual_samples(r.final_state.potential.dim(), o.seed));
  } catch (const Error& e) {
    summary["phi_equation_residual"] = nullptr;
    summary["phi_equation_residual_error"] = error_json(e);
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "timing.json",
             json{{"wall_seconds", wall}, {"workers", worker_count()}}.dump(2) + "\n");

  out << "flow " << (r.failure ? "FAILED: " + describe(*r.failure) : std::string("ok"))
      << " (t = " << r.final_state.t << ", " << r.steps << " steps, " << r.series.size()
      << " samples) -> " << dir.string() << "\n";
  return r.failure ? kRuntimeFailure : kOk;
}

int cmd_functionals(const RunConfig& c, const Options& o, std::ostream& out) {
  const Setup s = make_setup(c);
  if (auto bad = first_failed(s, o.seed)) {
    out << "FAIL " << bad->name << ": " << bad->detail << "\n";
    return kValidationFailure;
  }
  const int m = s.polytope->dim();
  const auto u = SymplecticPotential::analytic(s.polytope, c.v0.build(m));
  const auto q = build_quadrature(*s.polytope, c.functionals_quadrature);
  const FunctionalReport rep =
      mabuchi_energy(u, s.d0.B, SymplecticPotential::canonical(s.polytope), q);

  const InteriorGrid& grid = s.state.potential.grid();
  const auto kappa = gen_scalar_curvature(u, s.d0.B, grid);
  double kmin = std::numeric_limits<double>::infinity(), kmax = -kmin, ksum = 0.0;
  std::size_t kn = 0;
  for (std::size_t k = 0; k < kappa.size(); ++k) {
    if (grid.stencil_depth(k) < 2) continue;
    kmin = std::min(kmin, kappa[k]);
    kmax = std::max(kmax, kappa[k]);
    ksum += kappa[k];
    ++kn;
  }

  json j;
  j["mabuchi"] = rep.mabuchi;
  j["futaki_of_u"] = rep.futaki_of_u;
  j["entropy_term"] = rep.entropy_term;
  j["reference_entropy"] = rep.reference_entropy;
  j["a"] = normalization_constant(*s.polytope, q);
  json fut = json::array();
  for (int i = 0; i < m; ++i) fut.push_back(futaki(*s.polytope, q, [i](const Vec& x) { return x(i); }));
  j["futaki_coordinates"] = fut;
  j["kappa"] = {{"min", kmin}, {"max", kmax}, {"mean", kn ? ksum / static_cast<double>(kn) : 0.0},
                {"nodes", kn}};
  j["config"] = c.to_json();
  const std::string text = j.dump(2) + "\n";
  out << text;
  if (o.out_given) {
    fs::create_directories(c.out_dir);
    write_file(fs::path(c.out_dir) / "functionals.json", text);
  }
  return kOk;
}

int cmd_transform(const RunConfig& c, const Options& o, std::ostream& out) {
  const auto p = build_polytope(c);
  const int m = p->dim();
  const auto u = SymplecticPotential::analytic(p, c.v0.build(m));
  std::vector<std::vector<double>> ys = c.transform_y;
  if (ys.empty()) ys.push_back(std::vector<double>(static_cast<std::size_t>(m), 0.0));

  json pts = json::array();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (static_cast<int>(ys[i].size()) != m) {
      throw Error(ErrorKind::ConfigError,
                  "transform.y[" + std::to_string(i) + "]: length does not match the polytope dimension");
    }
    const LegendrePoint lp = legendre_solve(u, to_vec(ys[i]));
    json h = json::array();
    for (int a = 0; a < m; ++a) {
      json row = json::array();
      for (int b = 0; b < m; ++b) row.push_back(lp.hess_phi(a, b));
      h.push_back(row);
    }
    pts.push_back({{"y", ys[i]}, {"x", to_std(lp.x)}, {"phi", lp.phi}, {"hess_phi", h},
                   {"iterations", lp.iterations}});
  }
  const std::string text = json{{"points", pts}}.dump(2) + "\n";
  out << text;
  if (o.out_given) {
    fs::create_directories(c.out_dir);
    write_file(fs::path(c.out_dir) / "transform.json", text);
  }
  return kOk;
}

}  // namespace torifano::cli
