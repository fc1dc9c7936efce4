#pragma once

#include <complex>
#include <vector>

#include "torifano/grid.hpp"
#include "torifano/linalg.hpp"
#include "torifano/potential.hpp"

namespace torifano {

using ComplexMat =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

/// Constant skew pair (A, B). A enters only the complex structure and the
/// Poisson coefficients.
struct DeformationPair {
  Mat A;
  Mat B;

  /// Throws InvalidArgument unless both matrices are m x m and exactly skew.
  static DeformationPair make(const Mat& a, const Mat& b);
  static DeformationPair zero(int m);
  int dim() const { return static_cast<int>(B.rows()); }
};

/// beta * [[0, 1], [-1, 0]].
Mat standard_skew(double beta);

/// e^{-2t} M. Single source for every time-decayed deformation matrix.
Mat decayed(const Mat& m0, double t);

struct TamingResult {
  bool ok = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

/// Spectrum of [[G, B], [-B, G]].
TamingResult taming_check(const Mat& g, const Mat& b);

/// (G + iB)^{-1} = X + iY.
struct HermitianInverse {
  Mat X;
  Mat Y;
};
HermitianInverse hermitian_inverse(const Mat& g, const Mat& b);

/// log det(G + iB). Closed forms for m <= 2, block embedding otherwise.
/// Throws TamingFailure when the determinant is not positive.
double hermitian_logdet(const Mat& g, const Mat& b);
/// Same quantity always through sqrt det [[G, -B], [B, G]].
double hermitian_logdet_block(const Mat& g, const Mat& b);

struct MetricBlocks {
  Mat G;      // Hess u
  Mat Psi;    // G + A
  Mat X;      // Re (G + iB)^{-1}
  Mat Y;      // Im (G + iB)^{-1}
  BlockMat g;       // metric Gram matrix in the (theta, mu) frame
  BlockMat g_factored;
  BlockMat I;
  BlockMat J;
  BlockMat omega_J;
  BlockMat F;
  BlockMat omega0;
  double b_sq = 0.0;
};

/// Assembles every block from G = Hess u at one point.
MetricBlocks metric_blocks(const Mat& g, const DeformationPair& d);
/// Same with G taken from the potential; throws ConvexityLoss or
/// TamingFailure (with the point attached).
MetricBlocks metric_blocks(const SymplecticPotential& s,
                           const DeformationPair& d, const Vec& x);

/// Max Frobenius residual of the four polar-decomposition identities for
/// the symmetric / skew parts of Psi and Psi^{-1}.
double matrix_identity_suite(const Mat& psi);

/// tr[(Id + B H B H)^{-1}] - m.
double b_norm_sq(const Mat& h_phi, const Mat& b);

/// X_{ij} = Re(G + iB)^{-1} at every active node of the potential's grid,
/// or of `grid` for analytic potentials.
std::vector<Mat> x_field(const SymplecticPotential& s, const Mat& b,
                         const InteriorGrid& grid);

/// kappa = -sum_ij d^2 X_ij / dx_i dx_j on the active nodes of `grid`.
std::vector<double> gen_scalar_curvature(const SymplecticPotential& s,
                                         const Mat& b,
                                         const InteriorGrid& grid);

/// Pointwise kappa by fourth-order differences of X with step `delta`
/// (default: adapted to the distance to the boundary).
double gen_scalar_curvature_at(const SymplecticPotential& s, const Mat& b,
                               const Vec& x, double delta = 0.0);

/// Regularized Ricci potential
/// h = 1/2 [sum log L_k + log det(G + iB) - sum (L_k - 1)] + v - <x, grad v>.
/// Requires a barycentred polytope.
double ricci_potential(const SymplecticPotential& s, const Mat& b,
                       const Vec& x);
/// Same at active node k of a grid potential, using node stencils.
double ricci_potential_node(const SymplecticPotential& s, const Mat& b,
                            std::size_t k);

/// tr[(H + H B H B H)^{-1} Hess_y f].
double chern_laplacian(const Mat& h_phi, const Mat& b, const Mat& hess_f);
/// log det((Hess phi)^{-1} + iB)^{-1}.
double phi_side_logdet(const Mat& h_phi, const Mat& b);

/// 2 (A + iB).
ComplexMat poisson_coefficients(const DeformationPair& d);
/// 2 (A_t + i B_t) with A_t, B_t = e^{-2t} (A_0, B_0).
ComplexMat poisson_coefficients(const DeformationPair& d0, double t);

}  // namespace torifano
