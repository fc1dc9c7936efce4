#include "torifano/functionals.hpp"

#include <cmath>

#include "torifano/errors.hpp"
#include "torifano/geometry.hpp"
#include "torifano/parallel.hpp"

namespace torifano {

namespace {

double sum_weighted(const std::vector<double>& w, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * f[k];
  return s;
}

}  // namespace

double regularized_entropy(const SymplecticPotential& s, const Mat& b,
                           const PolytopeQuadrature& q) {
  const DelzantPolytope& p = s.polytope();
  std::vector<double> f(q.interior_nodes.size());
  parallel_for(f.size(), [&](std::size_t k) {
    const Vec& x = q.interior_nodes[k];
    const Mat g = s.eval_u(x).hess;
    double logdet = 0.0;
    try {
      logdet = hermitian_logdet(g, b);
    } catch (const Error& e) {
      throw Error(e.kind(), e.what(), to_std(x));
    }
    double sum_log = 0.0;
    for (std::size_t j = 0; j < p.num_labels(); ++j) sum_log += std::log(p.L(j, x));
    f[k] = sum_log + logdet;
  });
  return sum_weighted(q.interior_weights, f);
}

FunctionalReport mabuchi_energy(const SymplecticPotential& s, const Mat& b,
                                const SymplecticPotential& reference,
                                const PolytopeQuadrature& q) {
  FunctionalReport r;
  r.a = futaki_constant(q);
  r.futaki_of_u = futaki(s.polytope(), q, [&](const Vec& x) { return s.value_on_closure(x); });
  r.entropy_term = regularized_entropy(s, b, q);
  r.reference_entropy =
      regularized_entropy(reference, Mat::Zero(s.dim(), s.dim()), q);
  r.mabuchi = r.futaki_of_u - r.entropy_term + r.reference_entropy;
  return r;
}

std::vector<double> kappa_on_quadrature(const SymplecticPotential& s,
                                        const Mat& b,
                                        const PolytopeQuadrature& q) {
  std::vector<double> kappa(q.interior_nodes.size());
  if (s.representation() == SymplecticPotential::Representation::Analytic) {
    parallel_for(kappa.size(), [&](std::size_t k) {
      kappa[k] = gen_scalar_curvature_at(s, b, q.interior_nodes[k]);
    });
    return kappa;
  }
  const std::vector<double> field = gen_scalar_curvature(s, b, s.grid());
  parallel_for(kappa.size(), [&](std::size_t k) {
    kappa[k] = interpolation_stencil(s.grid(), q.interior_nodes[k]).apply(field);
  });
  return kappa;
}

double mabuchi_first_variation(const PolytopeQuadrature& q,
                               const ScalarField& u_dot,
                               const std::vector<double>& kappa) {
  if (kappa.size() != q.interior_nodes.size()) {
    throw Error(ErrorKind::InvalidArgument, "kappa does not match the quadrature");
  }
  const double a = futaki_constant(q);
  double s = 0.0;
  for (std::size_t k = 0; k < kappa.size(); ++k) {
    s += q.interior_weights[k] * u_dot(q.interior_nodes[k]) * (kappa[k] - a);
  }
  return s;
}

double mabuchi_first_variation(const SymplecticPotential& s, const Mat& b,
                               const ScalarField& u_dot,
                               const PolytopeQuadrature& q) {
  return mabuchi_first_variation(q, u_dot, kappa_on_quadrature(s, b, q));
}

SecondVariation mabuchi_second_variation(const SymplecticPotential& s,
                                         const Mat& b,
                                         const SmoothPart& u_dot,
                                         const PolytopeQuadrature& q) {
  const std::size_t n = q.interior_nodes.size();
  std::vector<double> re(n), im(n);
  parallel_for(n, [&](std::size_t k) {
    const Vec& x = q.interior_nodes[k];
    const Mat g = s.eval_u(x).hess;
    const auto hi = hermitian_inverse(g, b);
    const Mat hd = u_dot(x).hess;
    // K = (X + iY) Hd; tr K^2 = tr[(X Hd)^2 - (Y Hd)^2] + 2i tr[X Hd Y Hd].
    const Mat xh = hi.X * hd;
    const Mat yh = hi.Y * hd;
    re[k] = (xh * xh).trace() - (yh * yh).trace();
    im[k] = 2.0 * (xh * yh).trace();
  });
  SecondVariation out;
  out.value = sum_weighted(q.interior_weights, re);
  for (double v : im) out.max_imaginary = std::max(out.max_imaginary, std::abs(v));
  return out;
}

}  // namespace torifano
