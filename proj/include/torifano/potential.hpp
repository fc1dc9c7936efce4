#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "torifano/grid.hpp"
#include "torifano/linalg.hpp"
#include "torifano/polytope.hpp"

namespace torifano {

/// Guillemin potential u_c = 1/2 sum_j L_j log L_j with analytic gradient
/// and Hessian. Throws BoundaryContact unless x is strictly interior.
Jet canonical_potential(const DelzantPolytope& p, const Vec& x);

/// Value of u_c on the closure of P (L log L := 0 on the facets).
double canonical_value(const DelzantPolytope& p, const Vec& x);

/// Closure returning (v, grad v, Hess v) at a point of the closed polytope.
using SmoothPart = std::function<Jet(const Vec&)>;

SmoothPart zero_smooth_part(int m);

/// Smooth compactly supported bump, peak `amplitude` at `center`,
/// support radius `width`.
SmoothPart bump_smooth_part(const Vec& center, double amplitude, double width);

/// sum_k c_k x^{e_k}; each key is an exponent tuple of length m.
SmoothPart polynomial_smooth_part(
    const std::map<std::vector<int>, double>& coefficients);

/// Symplectic potential u = u_c + v with v either an analytic closure or a
/// field on the active nodes of an InteriorGrid. Immutable; copies share
/// their data.
class SymplecticPotential {
 public:
  enum class Representation { Analytic, Grid };

  static SymplecticPotential canonical(std::shared_ptr<const DelzantPolytope> p);
  static SymplecticPotential analytic(std::shared_ptr<const DelzantPolytope> p,
                                      SmoothPart v);
  static SymplecticPotential on_grid(std::shared_ptr<const DelzantPolytope> p,
                                     std::shared_ptr<const InteriorGrid> grid,
                                     std::vector<double> values);
  /// Samples an analytic smooth part on the active nodes of `grid`.
  static SymplecticPotential sampled(std::shared_ptr<const DelzantPolytope> p,
                                     std::shared_ptr<const InteriorGrid> grid,
                                     const SmoothPart& v);

  Representation representation() const { return rep_; }
  const DelzantPolytope& polytope() const { return *polytope_; }
  const std::shared_ptr<const DelzantPolytope>& polytope_ptr() const { return polytope_; }
  int dim() const { return polytope_->dim(); }

  /// Smooth part at any point of the closed polytope (grid: cubic
  /// interpolation of the node jets, extrapolated near the mask edge).
  Jet eval_v(const Vec& x) const;

  /// u = u_c + v with strict convexity check. Throws BoundaryContact or
  /// ConvexityLoss.
  Jet eval_u(const Vec& x) const;
  /// Same without the convexity check.
  Jet eval_u_unchecked(const Vec& x) const;

  /// u on the closure of P (used for boundary integrals).
  double value_on_closure(const Vec& x) const;

  /// Grid representation only.
  const InteriorGrid& grid() const;
  const std::shared_ptr<const InteriorGrid>& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const;
  const std::vector<Jet>& node_jets() const;
  /// u jets at active node k, assembled from the node stencils.
  Jet node_u(std::size_t k) const;

  /// u + eps * direction, same representation.
  SymplecticPotential perturbed(const SmoothPart& direction, double eps) const;
  /// Grid representation with the smooth part replaced.
  SymplecticPotential with_values(std::vector<double> values) const;

 private:
  struct GridData {
    std::vector<double> values;
    std::vector<Jet> jets;
  };

  Representation rep_ = Representation::Analytic;
  std::shared_ptr<const DelzantPolytope> polytope_;
  SmoothPart analytic_;
  std::shared_ptr<const InteriorGrid> grid_;
  std::shared_ptr<const GridData> data_;
};

/// Throws ConvexityLoss if the Hessian is not positive definite.
void require_convex(const Mat& hess, const Vec& x);

struct LegendrePoint {
  Vec y;
  Vec x;
  double phi = 0.0;
  Mat hess_phi;
  int iterations = 0;
};

/// Solves grad u(x) = y by damped Newton from the barycenter and returns
/// phi(y) = <y, x> - u(x) and Hess phi = (Hess u)^{-1}.
LegendrePoint legendre_solve(const SymplecticPotential& s, const Vec& y,
                             double tolerance = 1e-10, int max_iterations = 200);

/// Round trip x -> y = grad u(x) -> x(y); max over samples of
/// |x_rec - x| + |u_rec - u(x)|.
double legendre_involution_check(const SymplecticPotential& s,
                                 const std::vector<Vec>& sample_x);

/// max_y |phi_dot(y) + u_dot(x(y))|, with phi_dot the central difference of
/// the Legendre transforms of u -/+ eps * u_dot at fixed y.
double variation_sign_convention(const SymplecticPotential& s,
                                 const SmoothPart& u_dot,
                                 const std::vector<Vec>& sample_y,
                                 double eps = 1e-5);

}  // namespace torifano
