#pragma once

#include <vector>

#include "torifano/polytope.hpp"
#include "torifano/potential.hpp"

namespace torifano {

/// mabuchi = futaki_of_u - entropy_term + reference_entropy. The entropy
/// terms are the finite parts int [sum_k log L_k + log det(Hess + iB)] dx;
/// the divergent -sum log L_k pieces cancel between them.
struct FunctionalReport {
  double mabuchi = 0.0;
  double futaki_of_u = 0.0;
  double entropy_term = 0.0;
  double reference_entropy = 0.0;
  double a = 0.0;
};

FunctionalReport mabuchi_energy(const SymplecticPotential& s, const Mat& b,
                                const SymplecticPotential& reference,
                                const PolytopeQuadrature& q);

/// Regularized entropy integral alone (B = 0 for the reference).
double regularized_entropy(const SymplecticPotential& s, const Mat& b,
                           const PolytopeQuadrature& q);

/// kappa at the interior quadrature nodes. Analytic potentials use the
/// pointwise difference formula; grid potentials interpolate the grid field.
std::vector<double> kappa_on_quadrature(const SymplecticPotential& s,
                                        const Mat& b,
                                        const PolytopeQuadrature& q);

/// int u_dot (kappa - a) dx with kappa given at the interior nodes of q.
double mabuchi_first_variation(const PolytopeQuadrature& q,
                               const ScalarField& u_dot,
                               const std::vector<double>& kappa);
/// Convenience: computes kappa first.
double mabuchi_first_variation(const SymplecticPotential& s, const Mat& b,
                               const ScalarField& u_dot,
                               const PolytopeQuadrature& q);

struct SecondVariation {
  double value = 0.0;
  /// max over nodes of |Im tr[((G + iB)^{-1} Hess u_dot)^2]|
  double max_imaginary = 0.0;
};

SecondVariation mabuchi_second_variation(const SymplecticPotential& s,
                                         const Mat& b,
                                         const SmoothPart& u_dot,
                                         const PolytopeQuadrature& q);

}  // namespace torifano
