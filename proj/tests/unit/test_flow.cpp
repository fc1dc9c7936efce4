#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "torifano/flow.hpp"
#include "torifano/functionals.hpp"

using namespace torifano;

namespace {

std::shared_ptr<const DelzantPolytope> shared_preset(const char* name) {
  return std::make_shared<const DelzantPolytope>(preset(name));
}

double sup_abs(const std::vector<double>& f) {
  double s = 0.0;
  for (double v : f) s = std::max(s, std::abs(v));
  return s;
}

long node_at(const FlowState& s, const Vec& x) {
  const auto& g = s.potential.grid();
  for (std::size_t k = 0; k < g.num_active(); ++k) {
    if ((g.active_coords(k) - x).norm() < 1e-12) return static_cast<long>(k);
  }
  return -1;
}

FlowState bumped_square(double beta, int res, const Mat& a = Mat::Zero(2, 2)) {
  return FlowState::initial(shared_preset("cp1xcp1"),
                            DeformationPair::make(a, standard_skew(beta)),
                            bump_smooth_part(Vec::Zero(2), 0.1, 1.0), res);
}

}  // namespace

TEST_CASE("segment Guillemin potential is a fixed point") {
  const auto s0 = FlowState::initial(shared_preset("cp1"), DeformationPair::zero(1),
                                     zero_smooth_part(1), 201);
  CHECK(sup_abs(flow_rhs(s0)) < 1e-9);

  FlowConfig cfg;
  FlowState s = s0;
  s.dt = stable_dt(s, 0.25);
  for (int i = 0; i < 1000; ++i) s = step(s, cfg);
  CHECK(s.step == 1000);
  CHECK(sup_abs(s.potential.values()) < 1e-8);
}

TEST_CASE("square fixed point and the closed form at the centre") {
  const auto s0 = FlowState::initial(shared_preset("cp1xcp1"), DeformationPair::zero(2),
                                     zero_smooth_part(2), 41);
  CHECK(sup_abs(flow_rhs(s0)) < 1e-12);

  const auto s1 = FlowState::initial(shared_preset("cp1xcp1"),
                                     DeformationPair::make(Mat::Zero(2, 2), standard_skew(0.3)),
                                     zero_smooth_part(2), 41);
  const long c = node_at(s1, Vec::Zero(2));
  REQUIRE(c >= 0);
  // det(I + iB) = 1 - beta^2 for the standard skew form.
  CHECK(flow_rhs(s1)[static_cast<std::size_t>(c)] == doctest::Approx(std::log(0.91)).epsilon(1e-14));
}

TEST_CASE("one Euler step is exactly v + dt RHS") {
  FlowConfig cfg;
  cfg.scheme = Scheme::ExplicitEuler;
  const auto s = bumped_square(0.3, 31);
  const auto r = flow_rhs(s);
  const double dt = 1e-4;
  const auto n = step(s, cfg, dt);
  std::size_t mismatches = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (n.potential.values()[k] != s.potential.values()[k] + dt * r[k]) ++mismatches;
  }
  CHECK(mismatches == 0);
  CHECK(n.t == dt);
  CHECK(n.B() == decayed(s.D0.B, dt));
}

TEST_CASE("a step far beyond the parabolic limit aborts") {
  FlowConfig cfg;
  auto s = bumped_square(0.3, 41);
  const double dt = 50.0 * stable_dt(s, 0.25);
  bool aborted = false;
  for (int i = 0; i < 200 && !aborted; ++i) {
    try {
      s = step(s, cfg, dt);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::StabilityAbort);
      aborted = true;
    }
  }
  CHECK(aborted);
}

TEST_CASE("a fixed oversize dt is reported as a failure, not thrown") {
  FlowConfig cfg;
  cfg.t_end = 0.5;
  cfg.light_observables = true;
  const auto s = bumped_square(0.3, 41);
  cfg.dt = 50.0 * stable_dt(s, 0.25);
  const auto r = run(s, cfg);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure->kind() == ErrorKind::StabilityAbort);
  CHECK(std::string(r.failure->what()).find("(t = ") != std::string::npos);
}

TEST_CASE("t_end = 0 gives one record and the initial state") {
  FlowConfig cfg;
  cfg.t_end = 0.0;
  cfg.resolution = 31;
  const auto s = bumped_square(0.3, 31);
  const auto r = run(s, cfg);
  INFO(std::string(r.failure ? r.failure->what() : ""));
  CHECK_FALSE(r.failure.has_value());
  REQUIRE(r.series.size() == 1);
  CHECK(r.series[0].t == 0.0);
  CHECK(r.final_state.t == 0.0);
  CHECK(r.final_state.potential.values() == s.potential.values());
}

TEST_CASE("samples land on the cadence and t is strictly increasing") {
  FlowConfig cfg;
  cfg.t_end = 0.03;
  cfg.cadence = 0.01;
  cfg.light_observables = true;
  const auto r = run(bumped_square(0.3, 31), cfg);
  CHECK_FALSE(r.failure.has_value());
  REQUIRE(r.series.size() == 4);
  for (std::size_t i = 1; i < r.series.size(); ++i) {
    CHECK(r.series[i].t > r.series[i - 1].t);
    CHECK(r.series[i].t == doctest::Approx(0.01 * static_cast<double>(i)).epsilon(1e-15));
  }
  CHECK(r.final_state.t == 0.03);
  CHECK(r.growth_envelope > 0.0);
}

TEST_CASE("B_t and the Poisson coefficients are derived exactly") {
  const Mat a = standard_skew(0.2);
  const auto s0 = bumped_square(0.3, 31, a);
  FlowConfig cfg;
  cfg.t_end = 0.02;
  cfg.cadence = 0.01;
  cfg.light_observables = true;
  std::vector<FlowState> seen;
  run(s0, cfg, [&](const FlowState& s, const ObservableRecord&) { seen.push_back(s); });
  REQUIRE(seen.size() == 3);
  for (const auto& s : seen) {
    const double e = std::exp(-2.0 * s.t);
    CHECK(s.B() == (e * s0.D0.B).eval());
    CHECK(s.A() == (e * a).eval());
    const ComplexMat pc = poisson_coefficients(s.D0, s.t);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        CHECK(pc(i, j).real() == e * 2.0 * a(i, j));
        CHECK(pc(i, j).imag() == e * 2.0 * s0.D0.B(i, j));
      }
  }
}

TEST_CASE("A does not enter the u trajectory") {
  FlowConfig cfg;
  cfg.t_end = 0.02;
  cfg.cadence = 0.01;
  cfg.light_observables = true;
  const auto r1 = run(bumped_square(0.3, 31), cfg);
  const auto r2 = run(bumped_square(0.3, 31, standard_skew(0.7)), cfg);
  CHECK(r1.steps == r2.steps);
  CHECK(r1.final_state.potential.values() == r2.final_state.potential.values());
}

TEST_CASE("phi-side residual vanishes at the segment fixed point") {
  const auto s = FlowState::initial(shared_preset("cp1"), DeformationPair::zero(1),
                                    zero_smooth_part(1), 201);
  const auto r = flow_rhs(s);
  Vec y0(1), y1(1);
  y0 << 0.0;
  y1 << 1.0;
  CHECK(phi_equation_residual(s, r, {y0}) < 1e-12);
  CHECK(phi_equation_residual(s, r, {y1}) < 1e-8);
}

TEST_CASE("snapshot round trip and resume are exact") {
  FlowConfig cfg;
  auto s = bumped_square(0.3, 31);
  s.dt = stable_dt(s, 0.25);
  for (int i = 0; i < 5; ++i) s = step(s, cfg);

  const FlowState back = snapshot_from_json(snapshot_to_json(s));
  CHECK(back.t == s.t);
  CHECK(back.step == s.step);
  CHECK(back.dt == s.dt);
  CHECK(back.D0.B == s.D0.B);
  CHECK(back.potential.values() == s.potential.values());

  const auto a = step(s, cfg);
  const auto b = step(back, cfg);
  CHECK(a.potential.values() == b.potential.values());
  CHECK(a.t == b.t);

  CHECK_THROWS_AS(snapshot_from_json("{\"format\": \"other\"}"), Error);
  CHECK_THROWS_AS(snapshot_from_json("not json"), Error);
}

TEST_CASE("sup b^2 does not increase along a short run") {
  FlowConfig cfg;
  cfg.t_end = 0.05;
  cfg.cadence = 0.01;
  cfg.light_observables = true;
  const auto r = run(bumped_square(0.3, 31), cfg);
  REQUIRE_FALSE(r.failure.has_value());
  for (std::size_t i = 1; i < r.series.size(); ++i) {
    CHECK(r.series[i].sup_b_sq <= r.series[i - 1].sup_b_sq * (1.0 + 1e-6));
  }
}

TEST_CASE("results do not depend on the worker count") {
  FlowConfig cfg;
  cfg.t_end = 0.01;
  cfg.cadence = 0.01;
  cfg.light_observables = true;
  const auto s = bumped_square(0.3, 41);
  setenv("TORIFANO_THREADS", "1", 1);
  const auto r1 = run(s, cfg);
  setenv("TORIFANO_THREADS", "3", 1);
  const auto r3 = run(s, cfg);
  unsetenv("TORIFANO_THREADS");
  CHECK(r1.final_state.potential.values() == r3.final_state.potential.values());
}

TEST_CASE("config validation") {
  FlowConfig cfg;
  cfg.dt = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.dt.reset();
  cfg.t_end = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.t_end = 1.0;
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_AS(FlowState::initial(std::make_shared<const DelzantPolytope>(
                                         DelzantPolytope::build({{{1}, 0.5}, {{-1}, 1.5}}, false)),
                                     DeformationPair::zero(1), zero_smooth_part(1), 41),
                  Error);
}
