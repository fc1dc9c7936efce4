#include "torifano/grid.hpp"

#include <algorithm>
#include <cmath>

#include "torifano/errors.hpp"

namespace torifano {

InteriorGrid::InteriorGrid(const DelzantPolytope& p, int resolution,
                           double margin)
    : dim_(p.dim()), resolution_(resolution), margin_(margin) {
  if (resolution < 8) {
    throw Error(ErrorKind::InvalidArgument, "grid resolution must be >= 8");
  }
  const Vec ext = p.box_hi() - p.box_lo();
  h_ = ext.maxCoeff() / (resolution - 1);
  lo_ = p.box_lo();
  std::size_t total = 1;
  for (int a = 0; a < dim_; ++a) {
    counts_[static_cast<std::size_t>(a)] = static_cast<int>(std::lround(ext(a) / h_)) + 1;
    total *= static_cast<std::size_t>(counts_[static_cast<std::size_t>(a)]);
  }
  const double threshold = margin_ * h_ * p.min_normal_norm();
  std::vector<char> on(total, 0);
  for (std::size_t node = 0; node < total; ++node) {
    on[node] = p.min_L(node_coords(node)) > threshold;
  }
  // Drop nodes in sharp corners where no axis stencil fits; repeat since
  // each removal can strand a neighbour.
  auto is_on = [&](std::array<int, 3> idx, int a, int s) {
    idx[static_cast<std::size_t>(a)] += s;
    const long n = node_index(idx);
    return n >= 0 && on[static_cast<std::size_t>(n)];
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t node = 0; node < total; ++node) {
      if (!on[node]) continue;
      const auto idx = multi_index(node);
      for (int a = 0; a < dim_; ++a) {
        const bool central = is_on(idx, a, -1) && is_on(idx, a, 1);
        const bool fwd = is_on(idx, a, 1) && is_on(idx, a, 2) && is_on(idx, a, 3);
        const bool bwd = is_on(idx, a, -1) && is_on(idx, a, -2) && is_on(idx, a, -3);
        if (!central && !fwd && !bwd) {
          on[node] = 0;
          changed = true;
          break;
        }
      }
    }
  }
  active_of_node_.assign(total, -1);
  for (std::size_t node = 0; node < total; ++node) {
    if (on[node]) {
      active_of_node_[node] = static_cast<long>(active_nodes_.size());
      active_nodes_.push_back(node);
    }
  }
  if (active_nodes_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "grid has no active nodes");
  }
  depth_.assign(active_nodes_.size(), 3);
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) {
    const auto idx = multi_index(active_nodes_[k]);
    int depth = 3;
    for (int a = 0; a < dim_; ++a) {
      for (int s = 1; s <= 3; ++s) {
        auto lo_idx = idx;
        auto hi_idx = idx;
        lo_idx[static_cast<std::size_t>(a)] -= s;
        hi_idx[static_cast<std::size_t>(a)] += s;
        if (active_at(lo_idx) < 0 || active_at(hi_idx) < 0) {
          depth = std::min(depth, s - 1);
          break;
        }
      }
    }
    depth_[k] = depth;
  }

  stencils_.resize(active_nodes_.size() * static_cast<std::size_t>(dim_));
  for (std::size_t k = 0; k < active_nodes_.size(); ++k) {
    const auto idx = multi_index(active_nodes_[k]);
    for (int a = 0; a < dim_; ++a) {
      auto at = [&](int s) {
        auto j = idx;
        j[static_cast<std::size_t>(a)] += s;
        return active_at(j);
      };
      AxisStencil& st = stencils_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(a)];
      const long m2 = at(-2), m1 = at(-1), p1 = at(1), p2 = at(2);
      if (m2 >= 0 && m1 >= 0 && p1 >= 0 && p2 >= 0) {
        st = {0, 0, {m2, m1, p1, p2}};
      } else if (m1 >= 0 && p1 >= 0) {
        st = {1, 0, {m1, p1, -1, -1}};
      } else {
        const int dir = (p1 >= 0) ? 1 : -1;
        const long a1 = at(dir), a2 = at(2 * dir), a3 = at(3 * dir);
        if (a1 >= 0 && a2 >= 0 && a3 >= 0) st = {2, dir, {a1, a2, a3, -1}};
        else st = {3, 0, {-1, -1, -1, -1}};
      }
    }
  }
}

std::array<int, 3> InteriorGrid::multi_index(std::size_t node) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    const auto c = static_cast<std::size_t>(counts_[static_cast<std::size_t>(a)]);
    idx[static_cast<std::size_t>(a)] = static_cast<int>(node % c);
    node /= c;
  }
  return idx;
}

long InteriorGrid::node_index(const std::array<int, 3>& idx) const {
  long node = 0;
  for (int a = 0; a < dim_; ++a) {
    const int i = idx[static_cast<std::size_t>(a)];
    const int c = counts_[static_cast<std::size_t>(a)];
    if (i < 0 || i >= c) return -1;
    node = node * c + i;
  }
  return node;
}

long InteriorGrid::active_at(const std::array<int, 3>& idx) const {
  const long node = node_index(idx);
  return node < 0 ? -1 : active_of_node_[static_cast<std::size_t>(node)];
}

Vec InteriorGrid::node_coords(std::size_t node) const {
  const auto idx = multi_index(node);
  Vec x(dim_);
  for (int a = 0; a < dim_; ++a) x(a) = lo_(a) + h_ * idx[static_cast<std::size_t>(a)];
  return x;
}

void axis_derivatives(const InteriorGrid& grid, std::span<const double> f,
                      int axis, std::vector<double>* d1,
                      std::vector<double>* d2) {
  const std::size_t n = grid.num_active();
  const double h = grid.h();
  if (d1) d1->assign(n, 0.0);
  if (d2) d2->assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const AxisStencil& st = grid.axis_stencil(k, axis);
    auto val = [&](int i) { return f[static_cast<std::size_t>(st.nbr[i])]; };
    const double f0 = f[k];
    double first = 0.0;
    double second = 0.0;
    switch (st.kind) {
      case 0:
        first = (-val(3) + 8.0 * val(2) - 8.0 * val(1) + val(0)) / (12.0 * h);
        second = (-val(3) + 16.0 * val(2) - 30.0 * f0 + 16.0 * val(1) - val(0)) /
                 (12.0 * h * h);
        break;
      case 1:
        first = (val(1) - val(0)) / (2.0 * h);
        second = (val(1) - 2.0 * f0 + val(0)) / (h * h);
        break;
      case 2:
        first = st.dir * (-3.0 * f0 + 4.0 * val(0) - val(1)) / (2.0 * h);
        second = (2.0 * f0 - 5.0 * val(0) + 4.0 * val(1) - val(2)) / (h * h);
        break;
      default:
        throw Error(ErrorKind::EvaluationFailure,
                    "grid too thin for derivative stencil", to_std(grid.active_coords(k)));
    }
    if (d1) (*d1)[k] = first;
    if (d2) (*d2)[k] = second;
  }
}

std::vector<double> grid_second_derivative(const InteriorGrid& grid,
                                           std::span<const double> f, int i,
                                           int j) {
  std::vector<double> out;
  if (i == j) {
    axis_derivatives(grid, f, i, nullptr, &out);
    return out;
  }
  std::vector<double> di;
  axis_derivatives(grid, f, i, &di, nullptr);
  axis_derivatives(grid, di, j, &out, nullptr);
  return out;
}

std::vector<Jet> grid_jets(const InteriorGrid& grid, std::span<const double> f) {
  const int m = grid.dim();
  const std::size_t n = grid.num_active();
  std::vector<Jet> jets(n, Jet::zero(m));
  for (std::size_t k = 0; k < n; ++k) jets[k].value = f[k];
  std::vector<std::vector<double>> d1(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    std::vector<double> d2;
    axis_derivatives(grid, f, a, &d1[static_cast<std::size_t>(a)], &d2);
    for (std::size_t k = 0; k < n; ++k) {
      jets[k].grad(a) = d1[static_cast<std::size_t>(a)][k];
      jets[k].hess(a, a) = d2[k];
    }
  }
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      // Symmetrize the two composition orders.
      std::vector<double> dab, dba;
      axis_derivatives(grid, d1[static_cast<std::size_t>(a)], b, &dab, nullptr);
      axis_derivatives(grid, d1[static_cast<std::size_t>(b)], a, &dba, nullptr);
      for (std::size_t k = 0; k < n; ++k) {
        const double mixed = 0.5 * (dab[k] + dba[k]);
        jets[k].hess(a, b) = mixed;
        jets[k].hess(b, a) = mixed;
      }
    }
  }
  return jets;
}

double InterpolationStencil::apply(std::span<const double> f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < active.size(); ++i) s += weights[i] * f[active[i]];
  return s;
}

Jet InterpolationStencil::apply(std::span<const Jet> jets) const {
  const auto m = jets[active.front()].grad.size();
  Jet out = Jet::zero(static_cast<int>(m));
  for (std::size_t i = 0; i < active.size(); ++i) {
    const Jet& j = jets[active[i]];
    out.value += weights[i] * j.value;
    out.grad += weights[i] * j.grad;
    out.hess += weights[i] * j.hess;
  }
  return out;
}

namespace {

void lagrange_weights(double xi, double w[4]) {
  for (int k = 0; k < 4; ++k) {
    double num = 1.0;
    double den = 1.0;
    for (int l = 0; l < 4; ++l) {
      if (l == k) continue;
      num *= (xi - l);
      den *= (k - l);
    }
    w[k] = num / den;
  }
}

// Candidate block shifts ordered by L1 distance from the centred block.
const std::vector<std::array<int, 3>>& sorted_shifts(int m) {
  static const auto table = [] {
    constexpr int kReach = 4;
    constexpr int span = 2 * kReach + 1;
    std::array<std::vector<std::array<int, 3>>, 4> out;
    for (int dim = 1; dim <= 3; ++dim) {
      int total = 1;
      for (int a = 0; a < dim; ++a) total *= span;
      auto& shifts = out[static_cast<std::size_t>(dim)];
      for (int c = 0; c < total; ++c) {
        std::array<int, 3> s{0, 0, 0};
        int r = c;
        for (int a = 0; a < dim; ++a) {
          s[static_cast<std::size_t>(a)] = r % span - kReach;
          r /= span;
        }
        shifts.push_back(s);
      }
      std::stable_sort(shifts.begin(), shifts.end(), [](const auto& a, const auto& b) {
        return std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]) <
               std::abs(b[0]) + std::abs(b[1]) + std::abs(b[2]);
      });
    }
    return out;
  }();
  return table[static_cast<std::size_t>(m)];
}

}  // namespace

InterpolationStencil interpolation_stencil(const InteriorGrid& grid,
                                           const Vec& x, bool clamp) {
  const int m = grid.dim();
  std::array<int, 3> base{0, 0, 0};
  for (int a = 0; a < m; ++a) {
    base[static_cast<std::size_t>(a)] =
        static_cast<int>(std::floor((x(a) - grid.lo()(a)) / grid.h())) - 1;
  }
  const auto& shifts = sorted_shifts(m);

  int block = 1;
  for (int a = 0; a < m; ++a) block *= 4;
  for (const auto& s : shifts) {
    std::array<int, 3> origin{0, 0, 0};
    for (int a = 0; a < m; ++a) {
      origin[static_cast<std::size_t>(a)] = base[static_cast<std::size_t>(a)] + s[static_cast<std::size_t>(a)];
    }
    InterpolationStencil st;
    st.active.reserve(static_cast<std::size_t>(block));
    bool ok = true;
    for (int c = 0; c < block && ok; ++c) {
      std::array<int, 3> idx = origin;
      int r = c;
      for (int a = 0; a < m; ++a) {
        idx[static_cast<std::size_t>(a)] += r % 4;
        r /= 4;
      }
      const long act = grid.active_at(idx);
      if (act < 0) ok = false;
      else st.active.push_back(static_cast<std::size_t>(act));
    }
    if (!ok) continue;
    double w[3][4];
    st.anchor = x;
    for (int a = 0; a < m; ++a) {
      double xi = (x(a) - grid.lo()(a)) / grid.h() - origin[static_cast<std::size_t>(a)];
      if (clamp && (xi < 0.0 || xi > 3.0)) {
        xi = std::clamp(xi, 0.0, 3.0);
        st.anchor(a) = grid.lo()(a) + grid.h() * (origin[static_cast<std::size_t>(a)] + xi);
        st.clamped = true;
      }
      lagrange_weights(xi, w[a]);
    }
    st.weights.resize(static_cast<std::size_t>(block));
    for (int c = 0; c < block; ++c) {
      double wt = 1.0;
      int r = c;
      for (int a = 0; a < m; ++a) {
        wt *= w[a][r % 4];
        r /= 4;
      }
      st.weights[static_cast<std::size_t>(c)] = wt;
    }
    return st;
  }
  throw Error(ErrorKind::EvaluationFailure,
              "no active interpolation block near point", to_std(x));
}

}  // namespace torifano
