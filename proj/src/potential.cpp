#include "torifano/potential.hpp"

#include <cmath>

#include "torifano/errors.hpp"

namespace torifano {

Jet canonical_potential(const DelzantPolytope& p, const Vec& x) {
  const int m = p.dim();
  Jet out = Jet::zero(m);
  for (std::size_t j = 0; j < p.num_labels(); ++j) {
    const double l = p.L(j, x);
    if (!(l > 0.0)) {
      throw Error(ErrorKind::BoundaryContact, "point is not interior", to_std(x));
    }
    const Vec& v = p.normal(j);
    const double log_l = std::log(l);
    out.value += 0.5 * l * log_l;
    out.grad += 0.5 * (log_l + 1.0) * v;
    out.hess += (0.5 / l) * (v * v.transpose());
  }
  return out;
}

double canonical_value(const DelzantPolytope& p, const Vec& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.num_labels(); ++j) {
    const double l = p.L(j, x);
    if (l < -1e-12) {
      throw Error(ErrorKind::BoundaryContact, "point lies outside the polytope",
                  to_std(x));
    }
    if (l > 0.0) s += 0.5 * l * std::log(l);
  }
  return s;
}

SmoothPart zero_smooth_part(int m) {
  return [m](const Vec&) { return Jet::zero(m); };
}

SmoothPart bump_smooth_part(const Vec& center, double amplitude, double width) {
  if (!(width > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "bump width must be positive");
  }
  return [center, amplitude, width](const Vec& x) {
    const int m = static_cast<int>(x.size());
    Jet out = Jet::zero(m);
    const Vec d = x - center;
    const double w2 = width * width;
    const double s = d.squaredNorm() / w2;
    if (s >= 1.0) return out;
    const double q = 1.0 / (1.0 - s);
    const double g = std::exp(1.0 - q);
    const double g1 = -g * q * q;                       // dg/ds
    const double g2 = g * (q * q * q * q - 2.0 * q * q * q);  // d2g/ds2
    const Vec ds = (2.0 / w2) * d;
    out.value = amplitude * g;
    out.grad = amplitude * g1 * ds;
    out.hess = amplitude * (g2 * (ds * ds.transpose()) +
                            g1 * (2.0 / w2) * Mat::Identity(m, m));
    return out;
  };
}

SmoothPart polynomial_smooth_part(
    const std::map<std::vector<int>, double>& coefficients) {
  return [coefficients](const Vec& x) {
    const int m = static_cast<int>(x.size());
    Jet out = Jet::zero(m);
    auto mono = [&](const std::vector<int>& e) {
      double v = 1.0;
      for (int i = 0; i < m; ++i) v *= std::pow(x(i), e[static_cast<std::size_t>(i)]);
      return v;
    };
    for (const auto& [exps, c] : coefficients) {
      if (static_cast<int>(exps.size()) != m) {
        throw Error(ErrorKind::InvalidArgument, "polynomial exponent length mismatch");
      }
      out.value += c * mono(exps);
      for (int i = 0; i < m; ++i) {
        const int ei = exps[static_cast<std::size_t>(i)];
        if (ei == 0) continue;
        auto di = exps;
        di[static_cast<std::size_t>(i)] -= 1;
        out.grad(i) += c * ei * mono(di);
        for (int j = 0; j < m; ++j) {
          const int ej = di[static_cast<std::size_t>(j)];
          if (ej == 0) continue;
          auto dij = di;
          dij[static_cast<std::size_t>(j)] -= 1;
          out.hess(i, j) += c * ei * ej * mono(dij);
        }
      }
    }
    return out;
  };
}

// ---------------------------------------------------------------------------

SymplecticPotential SymplecticPotential::canonical(
    std::shared_ptr<const DelzantPolytope> p) {
  const int m = p->dim();
  return analytic(std::move(p), zero_smooth_part(m));
}

SymplecticPotential SymplecticPotential::analytic(
    std::shared_ptr<const DelzantPolytope> p, SmoothPart v) {
  SymplecticPotential s;
  s.rep_ = Representation::Analytic;
  s.polytope_ = std::move(p);
  s.analytic_ = std::move(v);
  return s;
}

SymplecticPotential SymplecticPotential::on_grid(
    std::shared_ptr<const DelzantPolytope> p,
    std::shared_ptr<const InteriorGrid> grid, std::vector<double> values) {
  if (values.size() != grid->num_active()) {
    throw Error(ErrorKind::InvalidArgument, "grid field has wrong length");
  }
  SymplecticPotential s;
  s.rep_ = Representation::Grid;
  s.polytope_ = std::move(p);
  auto data = std::make_shared<GridData>();
  data->jets = grid_jets(*grid, values);
  data->values = std::move(values);
  s.grid_ = std::move(grid);
  s.data_ = std::move(data);
  return s;
}

SymplecticPotential SymplecticPotential::sampled(
    std::shared_ptr<const DelzantPolytope> p,
    std::shared_ptr<const InteriorGrid> grid, const SmoothPart& v) {
  std::vector<double> values(grid->num_active());
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = v(grid->active_coords(k)).value;
  }
  return on_grid(std::move(p), std::move(grid), std::move(values));
}

Jet SymplecticPotential::eval_v(const Vec& x) const {
  if (rep_ == Representation::Analytic) return analytic_(x);
  // Outside the node hull: second-order Taylor extension from the clamped
  // point. Cubic extrapolation of one-sided Hessians is too rough there
  // and can break convexity near the facets on coarse grids.
  const InterpolationStencil st = interpolation_stencil(*grid_, x, true);
  Jet j = st.apply(std::span<const Jet>(data_->jets));
  if (!st.clamped) return j;
  const Vec d = x - st.anchor;
  j.value += j.grad.dot(d) + 0.5 * d.dot(j.hess * d);
  j.grad += j.hess * d;
  return j;
}

void require_convex(const Mat& hess, const Vec& x) {
  Eigen::LLT<Mat> llt(hess);
  if (llt.info() != Eigen::Success || !hess.allFinite()) {
    throw Error(ErrorKind::ConvexityLoss, "Hess u is not positive definite",
                to_std(x));
  }
}

Jet SymplecticPotential::eval_u_unchecked(const Vec& x) const {
  Jet u = canonical_potential(*polytope_, x);
  const Jet v = eval_v(x);
  u.value += v.value;
  u.grad += v.grad;
  u.hess += sym_part(v.hess);
  return u;
}

Jet SymplecticPotential::eval_u(const Vec& x) const {
  Jet u = eval_u_unchecked(x);
  require_convex(u.hess, x);
  return u;
}

double SymplecticPotential::value_on_closure(const Vec& x) const {
  return canonical_value(*polytope_, x) + eval_v(x).value;
}

const InteriorGrid& SymplecticPotential::grid() const {
  if (rep_ != Representation::Grid) {
    throw Error(ErrorKind::InvalidArgument, "potential is not grid-based");
  }
  return *grid_;
}

const std::vector<double>& SymplecticPotential::values() const {
  grid();
  return data_->values;
}

const std::vector<Jet>& SymplecticPotential::node_jets() const {
  grid();
  return data_->jets;
}

Jet SymplecticPotential::node_u(std::size_t k) const {
  const Vec x = grid_->active_coords(k);
  Jet u = canonical_potential(*polytope_, x);
  const Jet& v = data_->jets[k];
  u.value += v.value;
  u.grad += v.grad;
  u.hess += v.hess;
  return u;
}

SymplecticPotential SymplecticPotential::perturbed(const SmoothPart& direction,
                                                   double eps) const {
  if (rep_ == Representation::Analytic) {
    SmoothPart base = analytic_;
    return analytic(polytope_, [base, direction, eps](const Vec& x) {
      Jet a = base(x);
      const Jet b = direction(x);
      a.value += eps * b.value;
      a.grad += eps * b.grad;
      a.hess += eps * b.hess;
      return a;
    });
  }
  std::vector<double> values = data_->values;
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] += eps * direction(grid_->active_coords(k)).value;
  }
  return with_values(std::move(values));
}

SymplecticPotential SymplecticPotential::with_values(
    std::vector<double> values) const {
  return on_grid(polytope_, grid_, std::move(values));
}

// ---------------------------------------------------------------------------

LegendrePoint legendre_solve(const SymplecticPotential& s, const Vec& y,
                             double tolerance, int max_iterations) {
  const DelzantPolytope& p = s.polytope();
  const int m = p.dim();
  if (y.size() != m) throw Error(ErrorKind::InvalidArgument, "y has wrong dimension");
  Vec x = Vec::Zero(m);
  if (!p.barycentred()) {
    for (const auto& v : p.vertices()) x += v;
    x /= static_cast<double>(p.vertices().size());
  }

  Jet u = s.eval_u(x);
  Vec r = u.grad - y;
  int it = 0;
  while (r.norm() >= tolerance) {
    if (it >= max_iterations) {
      throw Error(ErrorKind::NoConvergence, "Legendre Newton iteration did not converge",
                  to_std(y));
    }
    ++it;
    const Vec dx = -u.hess.llt().solve(r);
    const double psi = u.value - y.dot(x);
    const double slope = r.dot(dx);
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 80; ++k, alpha *= 0.5) {
      const Vec trial = x + alpha * dx;
      if (!(p.min_L(trial) > 0.0)) continue;
      Jet ut = s.eval_u(trial);
      const Vec rt = ut.grad - y;
      const double psi_t = ut.value - y.dot(trial);
      if (psi_t <= psi + 1e-4 * alpha * slope || rt.norm() < r.norm()) {
        x = trial;
        u = std::move(ut);
        r = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw Error(ErrorKind::NoConvergence, "Legendre line search stalled", to_std(y));
    }
  }
  LegendrePoint out;
  out.y = y;
  out.x = x;
  out.phi = y.dot(x) - u.value;
  out.hess_phi = u.hess.inverse();
  out.iterations = it;
  return out;
}

double legendre_involution_check(const SymplecticPotential& s,
                                 const std::vector<Vec>& sample_x) {
  double worst = 0.0;
  for (const auto& x : sample_x) {
    const Jet u = s.eval_u(x);
    const LegendrePoint lp = legendre_solve(s, u.grad);
    const double u_rec = lp.y.dot(lp.x) - lp.phi;
    worst = std::max(worst, (lp.x - x).norm() + std::abs(u_rec - u.value));
  }
  return worst;
}

double variation_sign_convention(const SymplecticPotential& s,
                                 const SmoothPart& u_dot,
                                 const std::vector<Vec>& sample_y, double eps) {
  const SymplecticPotential plus = s.perturbed(u_dot, eps);
  const SymplecticPotential minus = s.perturbed(u_dot, -eps);
  double worst = 0.0;
  for (const auto& y : sample_y) {
    const LegendrePoint base = legendre_solve(s, y);
    const double phi_dot =
        (legendre_solve(plus, y).phi - legendre_solve(minus, y).phi) / (2.0 * eps);
    worst = std::max(worst, std::abs(phi_dot + u_dot(base.x).value));
  }
  return worst;
}

}  // namespace torifano
