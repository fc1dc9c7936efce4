#include "torifano/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "torifano/errors.hpp"

namespace torifano {

DeformationPair DeformationPair::make(const Mat& a, const Mat& b) {
  const auto m = b.rows();
  if (b.cols() != m || a.rows() != m || a.cols() != m) {
    throw Error(ErrorKind::InvalidArgument, "deformation matrices must be square and equal-sized");
  }
  if (!(a.transpose() == -a) || !(b.transpose() == -b)) {
    throw Error(ErrorKind::InvalidArgument, "deformation matrices must be skew");
  }
  return {a, b};
}

DeformationPair DeformationPair::zero(int m) {
  return {Mat::Zero(m, m), Mat::Zero(m, m)};
}

Mat standard_skew(double beta) {
  Mat b(2, 2);
  b << 0.0, beta, -beta, 0.0;
  return b;
}

Mat decayed(const Mat& m0, double t) { return std::exp(-2.0 * t) * m0; }

TamingResult taming_check(const Mat& g, const Mat& b) {
  const Mat minus_b = -b;
  const BlockMat block = block2x2(g, b, minus_b, g);
  Eigen::SelfAdjointEigenSolver<BlockMat> es(block, Eigen::EigenvaluesOnly);
  TamingResult r;
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.max_eigenvalue = es.eigenvalues().maxCoeff();
  // Relative threshold so that an exactly singular pair is not accepted on
  // rounding noise.
  r.ok = std::isfinite(r.min_eigenvalue) &&
         r.min_eigenvalue > 1e-12 * std::max(1.0, std::abs(r.max_eigenvalue));
  return r;
}

HermitianInverse hermitian_inverse(const Mat& g, const Mat& b) {
  const auto m = g.rows();
  if (m == 1) {
    return {Mat::Constant(1, 1, 1.0 / g(0, 0)), Mat::Zero(1, 1)};
  }
  const auto lu = g.partialPivLu();
  const Mat gi_b = lu.solve(b);
  const Mat x = (g + b * gi_b).inverse();
  HermitianInverse out;
  out.X = sym_part(x);
  out.Y = -gi_b * out.X;
  return out;
}

double hermitian_logdet_block(const Mat& g, const Mat& b) {
  const BlockMat e = hermitian_embedding(g, b);
  const double det = e.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw Error(ErrorKind::TamingFailure, "det(G + iB) is not positive");
  }
  return 0.5 * std::log(det);
}

double hermitian_logdet(const Mat& g, const Mat& b) {
  double det = 0.0;
  switch (g.rows()) {
    case 1:
      det = g(0, 0);
      break;
    case 2:
      det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) - b(0, 1) * b(0, 1);
      break;
    default:
      return hermitian_logdet_block(g, b);
  }
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw Error(ErrorKind::TamingFailure, "det(G + iB) is not positive");
  }
  return std::log(det);
}

namespace {

// Cheap taming test: G + iB Hermitian positive definite.
bool tamed(const Mat& g, const Mat& b) {
  switch (g.rows()) {
    case 1:
      return g(0, 0) > 0.0;
    case 2:
      return g(0, 0) > 0.0 &&
             g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) - b(0, 1) * b(0, 1) > 0.0;
    default:
      return taming_check(g, b).ok;
  }
}

void require_tamed(const Mat& g, const Mat& b, const Vec& x) {
  if (!tamed(g, b)) {
    throw Error(ErrorKind::TamingFailure, "Hess u + iB is not positive definite",
                to_std(x));
  }
}

double frob(const Mat& m) { return m.norm(); }

}  // namespace

MetricBlocks metric_blocks(const Mat& g, const DeformationPair& d) {
  const auto m = g.rows();
  const Mat& a = d.A;
  const Mat& b = d.B;
  const TamingResult tr = taming_check(g, b);
  if (!tr.ok) throw Error(ErrorKind::TamingFailure, "Hess u + iB is not positive definite");

  MetricBlocks mb;
  mb.G = g;
  mb.Psi = g + a;
  const auto lu = mb.Psi.fullPivLu();
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularMatrix, "G + A is singular");
  const Mat p = lu.inverse();
  const Mat pt = p.transpose();
  const Mat ps = sym_part(mb.Psi);
  const Mat zero = Mat::Zero(m, m);
  const Mat id = Mat::Identity(m, m);

  const HermitianInverse hi = hermitian_inverse(g, b);
  mb.X = hi.X;
  mb.Y = hi.Y;

  mb.g = block2x2(sym_part(p), p * b, -b * pt, ps);
  const Mat minus_b = -b;
  const BlockMat left = block2x2(p, zero, zero, id);
  mb.g_factored = left * block2x2(ps, b, minus_b, ps) * left.transpose();
  mb.I = block2x2(2.0 * b * p, mb.Psi + 4.0 * b * p * b, -p, -2.0 * p * b);
  mb.J = block2x2(zero, mb.Psi.transpose(), -pt, zero);
  mb.omega_J = block2x2(p * b * pt, -p * ps, ps * pt, b);
  mb.F = block2x2(zero, -id, id, 2.0 * b);
  mb.omega0 = block2x2(zero, -id, id, zero);
  mb.b_sq = b_norm_sq(g.inverse(), b);
  return mb;
}

MetricBlocks metric_blocks(const SymplecticPotential& s,
                           const DeformationPair& d, const Vec& x) {
  const Jet u = s.eval_u(x);
  try {
    return metric_blocks(u.hess, d);
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), to_std(x));
  }
}

double matrix_identity_suite(const Mat& psi) {
  const auto lu = psi.fullPivLu();
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularMatrix, "Psi is singular");
  const Mat inv = lu.inverse();
  const Mat ps = sym_part(psi), pa = skew_part(psi);
  const Mat is = sym_part(inv), ia = skew_part(inv);
  const Mat id = Mat::Identity(psi.rows(), psi.cols());
  return std::max({frob(psi * is * psi.transpose() - ps),
                   frob(psi * ia * psi.transpose() + pa),
                   frob(ps * ia + pa * is),
                   frob(ps * is + pa * ia - id)});
}

double b_norm_sq(const Mat& h_phi, const Mat& b) {
  const auto m = h_phi.rows();
  const Mat k = Mat::Identity(m, m) + b * h_phi * b * h_phi;
  const auto lu = k.fullPivLu();
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::TamingFailure, "Id + BHBH is singular");
  }
  return lu.inverse().trace() - static_cast<double>(m);
}

std::vector<Mat> x_field(const SymplecticPotential& s, const Mat& b,
                         const InteriorGrid& grid) {
  const bool on_nodes = s.representation() == SymplecticPotential::Representation::Grid &&
                        s.grid_ptr().get() == &grid;
  std::vector<Mat> out(grid.num_active());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Vec x = grid.active_coords(k);
    Mat g = on_nodes ? s.node_u(k).hess : s.eval_u_unchecked(x).hess;
    require_convex(g, x);
    require_tamed(g, b, x);
    out[k] = hermitian_inverse(g, b).X;
  }
  return out;
}

std::vector<double> gen_scalar_curvature(const SymplecticPotential& s,
                                         const Mat& b,
                                         const InteriorGrid& grid) {
  const int m = grid.dim();
  const std::vector<Mat> xs = x_field(s, b, grid);
  std::vector<double> kappa(xs.size(), 0.0);
  std::vector<double> comp(xs.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < xs.size(); ++k) comp[k] = xs[k](i, j);
      const auto d2 = grid_second_derivative(grid, comp, i, j);
      for (std::size_t k = 0; k < xs.size(); ++k) kappa[k] -= d2[k];
    }
  }
  return kappa;
}

double gen_scalar_curvature_at(const SymplecticPotential& s, const Mat& b,
                               const Vec& x, double delta) {
  const int m = s.dim();
  if (delta <= 0.0) {
    delta = std::min(1e-3, 0.08 * s.polytope().distance_to_boundary(x));
  }
  auto xm = [&](const Vec& pt) {
    const Mat g = s.eval_u(pt).hess;
    require_tamed(g, b, pt);
    return hermitian_inverse(g, b).X;
  };
  auto unit = [m](int i) {
    Vec e = Vec::Zero(m);
    e(i) = 1.0;
    return e;
  };
  const Mat x0 = xm(x);
  double kappa = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vec e = delta * unit(i);
    const double f2p = xm(x + 2.0 * e)(i, i), f1p = xm(x + e)(i, i);
    const double f1m = xm(x - e)(i, i), f2m = xm(x - 2.0 * e)(i, i);
    kappa -= (-f2p + 16.0 * f1p - 30.0 * x0(i, i) + 16.0 * f1m - f2m) /
             (12.0 * delta * delta);
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      auto cross = [&](double h) {
        const Vec ei = h * unit(i), ej = h * unit(j);
        return (xm(x + ei + ej)(i, j) - xm(x + ei - ej)(i, j) -
                xm(x - ei + ej)(i, j) + xm(x - ei - ej)(i, j)) /
               (4.0 * h * h);
      };
      // Richardson on the four-point cross stencil.
      const double mixed = (4.0 * cross(delta) - cross(2.0 * delta)) / 3.0;
      kappa -= 2.0 * mixed;
    }
  }
  return kappa;
}

namespace {

double regularized_h(const DelzantPolytope& p, const Vec& x, const Mat& g,
                     const Mat& b, double v, const Vec& grad_v) {
  if (!p.barycentred()) {
    throw Error(ErrorKind::NotBarycentred, "Ricci potential needs a barycentred polytope");
  }
  double sum_log = 0.0, sum_lm1 = 0.0;
  for (std::size_t j = 0; j < p.num_labels(); ++j) {
    const double l = p.L(j, x);
    sum_log += std::log(l);
    sum_lm1 += l - 1.0;
  }
  require_convex(g, x);
  require_tamed(g, b, x);
  const double logdet = hermitian_logdet(g, b);
  return 0.5 * (sum_log + logdet - sum_lm1) + v - x.dot(grad_v);
}

}  // namespace

double ricci_potential(const SymplecticPotential& s, const Mat& b,
                       const Vec& x) {
  const Jet u = s.eval_u_unchecked(x);
  const Jet v = s.eval_v(x);
  return regularized_h(s.polytope(), x, u.hess, b, v.value, v.grad);
}

double ricci_potential_node(const SymplecticPotential& s, const Mat& b,
                            std::size_t k) {
  const Vec x = s.grid().active_coords(k);
  const Jet u = s.node_u(k);
  const Jet& v = s.node_jets()[k];
  return regularized_h(s.polytope(), x, u.hess, b, v.value, v.grad);
}

double chern_laplacian(const Mat& h_phi, const Mat& b, const Mat& hess_f) {
  const Mat k = h_phi + h_phi * b * h_phi * b * h_phi;
  const auto lu = k.fullPivLu();
  if (!lu.isInvertible()) throw Error(ErrorKind::TamingFailure, "H + HBHBH is singular");
  return lu.solve(hess_f).trace();
}

double phi_side_logdet(const Mat& h_phi, const Mat& b) {
  return -hermitian_logdet(h_phi.inverse(), b);
}

ComplexMat poisson_coefficients(const DeformationPair& d) {
  const auto m = d.B.rows();
  ComplexMat out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      out(i, j) = {2.0 * d.A(i, j), 2.0 * d.B(i, j)};
    }
  }
  return out;
}

ComplexMat poisson_coefficients(const DeformationPair& d0, double t) {
  return poisson_coefficients(DeformationPair{decayed(d0.A, t), decayed(d0.B, t)});
}

}  // namespace torifano
