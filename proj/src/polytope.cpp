#include "torifano/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "torifano/errors.hpp"

namespace torifano {

double Label::eval(const Vec& x) const {
  double s = offset;
  for (std::size_t i = 0; i < normal.size(); ++i) {
    s += normal[i] * x(static_cast<Eigen::Index>(i));
  }
  return s;
}

Vec Label::normal_vec() const {
  Vec v(static_cast<Eigen::Index>(normal.size()));
  for (std::size_t i = 0; i < normal.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = normal[i];
  }
  return v;
}

namespace {

constexpr double kVertexTol = 1e-10;

int gcd_of(const std::vector<int>& v) {
  int g = 0;
  for (int c : v) g = std::gcd(g, std::abs(c));
  return g;
}

std::string describe_normal(const std::vector<int>& n) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
  os << ")";
  return os.str();
}

// Visit every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_combination(int n, int k, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

}  // namespace

DelzantPolytope DelzantPolytope::build(std::vector<Label> labels,
                                       bool fano_mode) {
  if (labels.empty()) throw Error(ErrorKind::Empty, "no labels given");
  const int m = static_cast<int>(labels.front().normal.size());
  if (m < 1 || m > kMaxDim) {
    throw Error(ErrorKind::InvalidArgument,
                "polytope dimension must be between 1 and 3");
  }
  const int d = static_cast<int>(labels.size());
  if (d < m + 1) {
    throw Error(ErrorKind::Unbounded, "need at least m+1 labels");
  }
  for (const auto& l : labels) {
    if (static_cast<int>(l.normal.size()) != m) {
      throw Error(ErrorKind::InvalidArgument, "label normals differ in length");
    }
    if (gcd_of(l.normal) != 1) {
      throw Error(ErrorKind::NotDelzant,
                  "normal " + describe_normal(l.normal) + " is not primitive");
    }
    if (!std::isfinite(l.offset)) {
      throw Error(ErrorKind::InvalidArgument, "non-finite offset");
    }
  }
  const bool all_one = std::all_of(labels.begin(), labels.end(),
                                   [](const Label& l) { return l.offset == 1.0; });
  if (fano_mode && !all_one) {
    throw Error(ErrorKind::NotBarycentred, "fano mode requires all offsets = 1");
  }

  DelzantPolytope p;
  p.dim_ = m;
  p.barycentred_ = all_one;
  p.labels_ = std::move(labels);
  for (const auto& l : p.labels_) {
    p.normals_.push_back(l.normal_vec());
    p.normal_norms_.push_back(p.normals_.back().norm());
  }
  p.min_normal_norm_ =
      *std::min_element(p.normal_norms_.begin(), p.normal_norms_.end());

  Eigen::MatrixXd all_normals(d, m);
  for (int j = 0; j < d; ++j) all_normals.row(j) = p.normals_[static_cast<std::size_t>(j)].transpose();
  if (Eigen::FullPivLU<Eigen::MatrixXd>(all_normals).rank() < m) {
    throw Error(ErrorKind::Unbounded, "normals do not span R^m");
  }

  // Recession cone {d : <v_j, d> >= 0 for all j}; its extreme rays lie on
  // the kernels of (m-1)-subsets of normals.
  auto recedes = [&](const Vec& dir) {
    for (int j = 0; j < d; ++j) {
      if (p.normals_[static_cast<std::size_t>(j)].dot(dir) < -1e-12) return false;
    }
    return true;
  };
  bool unbounded = false;
  if (m == 1) {
    unbounded = recedes(Vec::Constant(1, 1.0)) || recedes(Vec::Constant(1, -1.0));
  } else {
    for_each_combination(d, m - 1, [&](const std::vector<int>& idx) {
      Eigen::MatrixXd n(m - 1, m);
      for (int r = 0; r < m - 1; ++r) {
        n.row(r) = p.normals_[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])].transpose();
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(n);
      if (lu.rank() != m - 1) return;
      const Vec dir = lu.kernel().col(0);
      if (recedes(dir) || recedes(-dir)) unbounded = true;
    });
  }
  if (unbounded) throw Error(ErrorKind::Unbounded, "polytope contains a ray");

  // Vertex enumeration: intersect every m-subset of facets.
  for_each_combination(d, m, [&](const std::vector<int>& idx) {
    Mat n(m, m);
    Vec rhs(m);
    for (int r = 0; r < m; ++r) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(r)]);
      n.row(r) = p.normals_[j].transpose();
      rhs(r) = -p.labels_[j].offset;
    }
    if (std::abs(n.determinant()) < 1e-12) return;
    Vec x = n.partialPivLu().solve(rhs);
    if (p.min_L(x) < -kVertexTol) return;
    for (const auto& v : p.vertices_) {
      if ((v - x).norm() < 1e-9) return;
    }
    p.vertices_.push_back(x);
  });
  if (p.vertices_.empty()) throw Error(ErrorKind::Empty, "no feasible vertex");

  Vec centroid = Vec::Zero(m);
  for (const auto& v : p.vertices_) centroid += v;
  centroid /= static_cast<double>(p.vertices_.size());
  if (p.min_L(centroid) <= 1e-9) {
    throw Error(ErrorKind::Empty, "polytope has empty interior");
  }

  for (const auto& v : p.vertices_) {
    std::vector<int> active;
    for (int j = 0; j < d; ++j) {
      if (std::abs(p.L(static_cast<std::size_t>(j), v)) <= kVertexTol) active.push_back(j);
    }
    if (static_cast<int>(active.size()) != m) {
      throw Error(ErrorKind::NotDelzant, "vertex is not simple",
                  to_std(v));
    }
    Mat n(m, m);
    for (int r = 0; r < m; ++r) n.row(r) = p.normals_[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])].transpose();
    const double det = n.determinant();
    if (std::abs(std::abs(det) - 1.0) > 1e-9) {
      throw Error(ErrorKind::NotDelzant,
                  "normals at vertex do not form a Z-basis", to_std(v));
    }
    // Every edge leaving the vertex must hit another facet.
    const Mat inv = n.inverse();
    for (int k = 0; k < m; ++k) {
      const Vec dir = inv.col(k);
      bool blocked = false;
      for (int j = 0; j < d; ++j) {
        if (std::find(active.begin(), active.end(), j) != active.end()) continue;
        if (p.normals_[static_cast<std::size_t>(j)].dot(dir) < -1e-12) blocked = true;
      }
      if (!blocked) throw Error(ErrorKind::Unbounded, "unbounded edge at vertex", to_std(v));
    }
    p.vertex_facets_.push_back(std::move(active));
  }

  p.facet_vertices_.resize(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < p.vertices_.size(); ++k) {
    for (int j : p.vertex_facets_[k]) p.facet_vertices_[static_cast<std::size_t>(j)].push_back(static_cast<int>(k));
  }
  for (int j = 0; j < d; ++j) {
    if (static_cast<int>(p.facet_vertices_[static_cast<std::size_t>(j)].size()) < m) {
      throw Error(ErrorKind::NotDelzant,
                  "label " + std::to_string(j) + " does not define a facet");
    }
  }

  p.box_lo_ = p.vertices_.front();
  p.box_hi_ = p.vertices_.front();
  for (const auto& v : p.vertices_) {
    p.box_lo_ = p.box_lo_.cwiseMin(v);
    p.box_hi_ = p.box_hi_.cwiseMax(v);
  }
  return p;
}

double DelzantPolytope::L(std::size_t j, const Vec& x) const {
  return normals_[j].dot(x) + labels_[j].offset;
}

double DelzantPolytope::min_L(const Vec& x) const {
  double best = L(0, x);
  for (std::size_t j = 1; j < labels_.size(); ++j) best = std::min(best, L(j, x));
  return best;
}

double DelzantPolytope::distance_to_boundary(const Vec& x) const {
  double best = L(0, x) / normal_norms_[0];
  for (std::size_t j = 1; j < labels_.size(); ++j) {
    best = std::min(best, L(j, x) / normal_norms_[j]);
  }
  return best;
}

std::vector<Label> preset_labels(std::string_view name) {
  if (name == "cp1") return {{{1}, 1.0}, {{-1}, 1.0}};
  if (name == "cp1xcp1") {
    return {{{1, 0}, 1.0}, {{-1, 0}, 1.0}, {{0, 1}, 1.0}, {{0, -1}, 1.0}};
  }
  if (name == "cp2") return {{{1, 0}, 1.0}, {{0, 1}, 1.0}, {{-1, -1}, 1.0}};
  throw Error(ErrorKind::InvalidArgument,
              "unknown preset '" + std::string(name) + "'");
}

DelzantPolytope preset(std::string_view name) {
  return DelzantPolytope::build(preset_labels(name), true);
}

// ---------------------------------------------------------------------------
// Quadrature

double PolytopeQuadrature::volume() const {
  return std::accumulate(interior_weights.begin(), interior_weights.end(), 0.0);
}

double PolytopeQuadrature::facet_measure(std::size_t j) const {
  return std::accumulate(facet_weights[j].begin(), facet_weights[j].end(), 0.0);
}

double PolytopeQuadrature::boundary_measure() const {
  double s = 0.0;
  for (std::size_t j = 0; j < facet_weights.size(); ++j) s += facet_measure(j);
  return s;
}

std::size_t PolytopeQuadrature::num_boundary_nodes() const {
  std::size_t n = 0;
  for (const auto& f : facet_nodes) n += f.size();
  return n;
}

namespace {

constexpr double kGauss2 = 0.57735026918962576451;  // 1/sqrt(3)

// 3-point Gauss-Legendre on [-1, 1].
constexpr double kGauss3X = 0.77459666924148337704;  // sqrt(3/5)
constexpr double kGauss3W0 = 8.0 / 9.0;
constexpr double kGauss3W1 = 5.0 / 9.0;

void refine_interval(const DelzantPolytope& p, double a, double b, int level,
                     double grading, int levels, PolytopeQuadrature& q) {
  const double size = b - a;
  Vec mid(1);
  mid(0) = 0.5 * (a + b);
  const double dist = p.distance_to_boundary(mid) - 0.5 * size;
  if (level < levels && dist <= grading * size) {
    refine_interval(p, a, mid(0), level + 1, grading, levels, q);
    refine_interval(p, mid(0), b, level + 1, grading, levels, q);
    return;
  }
  for (double s : {-kGauss2, kGauss2}) {
    Vec x(1);
    x(0) = mid(0) + 0.5 * size * s;
    q.interior_nodes.push_back(x);
    q.interior_weights.push_back(0.5 * size);
  }
}

using Polygon = std::vector<Eigen::Vector2d>;

Polygon clip(const Polygon& poly, const Eigen::Vector2d& n, double c) {
  // Keep n.x + c >= 0 (Sutherland-Hodgman against one half-plane).
  Polygon out;
  const std::size_t k = poly.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % k];
    const double fa = n.dot(a) + c;
    const double fb = n.dot(b) + c;
    if (fa >= 0.0) out.push_back(a);
    if ((fa >= 0.0) != (fb >= 0.0)) {
      const double t = fa / (fa - fb);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

double polygon_area(const Polygon& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(s);
}

void push_node(PolytopeQuadrature& q, const Eigen::Vector2d& x, double w) {
  Vec v(2);
  v << x.x(), x.y();
  q.interior_nodes.push_back(v);
  q.interior_weights.push_back(w);
}

void refine_cell(const DelzantPolytope& p, const Eigen::Vector2d& lo,
                 double size, int level, double grading, int levels,
                 PolytopeQuadrature& q) {
  Polygon poly{lo, lo + Eigen::Vector2d(size, 0.0),
               lo + Eigen::Vector2d(size, size), lo + Eigen::Vector2d(0.0, size)};
  bool full = true;
  for (const auto& c : poly) {
    Vec v(2);
    v << c.x(), c.y();
    if (p.min_L(v) < 0.0) full = false;
  }
  if (!full) {
    for (std::size_t j = 0; j < p.num_labels(); ++j) {
      const Vec& n = p.normal(j);
      poly = clip(poly, Eigen::Vector2d(n(0), n(1)), p.label(j).offset);
      if (poly.size() < 3) return;
    }
    if (polygon_area(poly) < 1e-14 * size * size) return;
  }

  Vec center(2);
  center << lo.x() + 0.5 * size, lo.y() + 0.5 * size;
  const double dist = p.distance_to_boundary(center) - std::sqrt(0.5) * size;
  if (level < levels && dist <= grading * size) {
    const double h = 0.5 * size;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        refine_cell(p, lo + Eigen::Vector2d(i * h, j * h), h, level + 1,
                    grading, levels, q);
      }
    }
    return;
  }

  if (full) {
    const double w = 0.25 * size * size;
    for (double sx : {-kGauss2, kGauss2}) {
      for (double sy : {-kGauss2, kGauss2}) {
        push_node(q, lo + 0.5 * size * Eigen::Vector2d(1.0 + sx, 1.0 + sy), w);
      }
    }
    return;
  }

  // Cut cell: fan-triangulate from the vertex average and use the interior
  // three-point rule (degree 2) on each triangle.
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& v : poly) c += v;
  c /= static_cast<double>(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const double area = 0.5 * std::abs((a - c).x() * (b - c).y() - (a - c).y() * (b - c).x());
    if (area <= 1e-14 * size * size) continue;
    const Eigen::Vector2d pts[3] = {(4.0 * c + a + b) / 6.0, (c + 4.0 * a + b) / 6.0,
                                    (c + a + 4.0 * b) / 6.0};
    for (const auto& x : pts) push_node(q, x, area / 3.0);
  }
}

void refine_segment(double a, double b, double total, int level,
                    double grading, int levels, const Vec& p0, const Vec& dir,
                    double scale, std::vector<Vec>& nodes,
                    std::vector<double>& weights) {
  const double size = b - a;
  const double dist = std::min(a, total - b);
  if (level < levels && dist <= grading * size) {
    const double mid = 0.5 * (a + b);
    refine_segment(a, mid, total, level + 1, grading, levels, p0, dir, scale, nodes, weights);
    refine_segment(mid, b, total, level + 1, grading, levels, p0, dir, scale, nodes, weights);
    return;
  }
  const double mid = 0.5 * (a + b);
  const double xs[3] = {-kGauss3X, 0.0, kGauss3X};
  const double ws[3] = {kGauss3W1, kGauss3W0, kGauss3W1};
  for (int i = 0; i < 3; ++i) {
    const double s = mid + 0.5 * size * xs[i];
    nodes.push_back(p0 + s * dir);
    weights.push_back(0.5 * size * ws[i] * scale);
  }
}

}  // namespace

PolytopeQuadrature build_quadrature(const DelzantPolytope& p, int resolution,
                                    double grading, int levels) {
  if (resolution < 8) {
    throw Error(ErrorKind::InvalidArgument, "quadrature resolution must be >= 8");
  }
  PolytopeQuadrature q;
  q.grading = grading;
  q.levels = levels;
  const int m = p.dim();
  q.facet_nodes.resize(p.num_labels());
  q.facet_weights.resize(p.num_labels());

  if (m == 1) {
    q.order = 3;
    const double a = p.box_lo()(0);
    const double b = p.box_hi()(0);
    const double h = (b - a) / resolution;
    for (int i = 0; i < resolution; ++i) {
      refine_interval(p, a + i * h, a + (i + 1) * h, 0, grading, levels, q);
    }
    for (std::size_t j = 0; j < p.num_labels(); ++j) {
      const int k = p.facet_vertices(j).front();
      q.facet_nodes[j].push_back(p.vertices()[static_cast<std::size_t>(k)]);
      q.facet_weights[j].push_back(1.0 / p.normal(j).norm());
    }
    return q;
  }
  if (m != 2) {
    throw Error(ErrorKind::InvalidArgument, "quadrature supports m <= 2 only");
  }

  q.order = 2;
  const Vec ext = p.box_hi() - p.box_lo();
  const double h = ext.maxCoeff() / resolution;
  const int nx = static_cast<int>(std::ceil(ext(0) / h - 1e-12));
  const int ny = static_cast<int>(std::ceil(ext(1) / h - 1e-12));
  const Eigen::Vector2d lo(p.box_lo()(0), p.box_lo()(1));
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      refine_cell(p, lo + Eigen::Vector2d(i * h, j * h), h, 0, grading, levels, q);
    }
  }

  for (std::size_t j = 0; j < p.num_labels(); ++j) {
    const auto& fv = p.facet_vertices(j);
    const Vec& a = p.vertices()[static_cast<std::size_t>(fv[0])];
    const Vec& b = p.vertices()[static_cast<std::size_t>(fv[1])];
    const double len = (b - a).norm();
    const Vec dir = (b - a) / len;
    // dsigma_L: Lebesgue measure on the facet scaled so that dL ^ dsigma = dx.
    const double scale = 1.0 / p.normal(j).norm();
    const int nseg = std::max(4, static_cast<int>(std::ceil(len / h - 1e-12)));
    const double hs = len / nseg;
    for (int s = 0; s < nseg; ++s) {
      refine_segment(s * hs, (s + 1) * hs, len, 0, grading, levels, a, dir,
                     scale, q.facet_nodes[j], q.facet_weights[j]);
    }
  }
  return q;
}

double futaki_constant(const PolytopeQuadrature& q) {
  return 2.0 * q.boundary_measure() / q.volume();
}

double futaki(const DelzantPolytope& p, const PolytopeQuadrature& q,
              const ScalarField& f) {
  (void)p;
  const double a = futaki_constant(q);
  double interior = 0.0;
  for (std::size_t i = 0; i < q.interior_nodes.size(); ++i) {
    const double v = f(q.interior_nodes[i]);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::EvaluationFailure, "field is singular at interior node",
                  to_std(q.interior_nodes[i]));
    }
    interior += q.interior_weights[i] * v;
  }
  double boundary = 0.0;
  for (std::size_t j = 0; j < q.facet_nodes.size(); ++j) {
    for (std::size_t i = 0; i < q.facet_nodes[j].size(); ++i) {
      const double v = f(q.facet_nodes[j][i]);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::EvaluationFailure, "field is singular at boundary node",
                    to_std(q.facet_nodes[j][i]));
      }
      boundary += q.facet_weights[j][i] * v;
    }
  }
  return -a * interior + 2.0 * boundary;
}

double normalization_constant(const DelzantPolytope& p,
                              const PolytopeQuadrature& q) {
  if (!p.barycentred()) {
    throw Error(ErrorKind::NotBarycentred,
                "normalization constant is defined for barycentred polytopes");
  }
  return futaki_constant(q);
}

}  // namespace torifano
