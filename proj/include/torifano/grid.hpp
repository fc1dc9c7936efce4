#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "torifano/linalg.hpp"
#include "torifano/polytope.hpp"

namespace torifano {

/// Value, gradient and Hessian of a function at a point.
struct Jet {
  double value = 0.0;
  Vec grad;
  Mat hess;

  static Jet zero(int m) { return {0.0, Vec::Zero(m), Mat::Zero(m, m)}; }
};

/// One-dimensional derivative stencil at an active node along one axis.
/// kind 0: five-point central, nbr = {-2, -1, +1, +2};
/// kind 1: three-point central, nbr = {-1, +1};
/// kind 2: one-sided in direction dir, nbr = {1, 2, 3} steps;
/// kind 3: no stencil fits.
struct AxisStencil {
  int kind = 3;
  int dir = 0;
  long nbr[4] = {-1, -1, -1, -1};
};

/// Uniform grid over the bounding box of P. Nodes with
/// min_j L_j(x) > margin * h * min_j |v_j| are active (unmasked); fields
/// live on active nodes only and are indexed by their active index.
class InteriorGrid {
 public:
  InteriorGrid(const DelzantPolytope& p, int resolution, double margin = 1.5);

  int dim() const { return dim_; }
  double h() const { return h_; }
  double margin() const { return margin_; }
  int resolution() const { return resolution_; }
  const Vec& lo() const { return lo_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  std::size_t num_nodes() const { return active_of_node_.size(); }
  std::size_t num_active() const { return active_nodes_.size(); }

  /// Box node index of the k-th active node.
  std::size_t node_of_active(std::size_t k) const { return active_nodes_[k]; }
  /// Active index of a box node, or -1 when masked.
  long active_of_node(std::size_t node) const { return active_of_node_[node]; }

  std::array<int, 3> multi_index(std::size_t node) const;
  /// -1 when the multi-index is outside the box.
  long node_index(const std::array<int, 3>& idx) const;
  /// Active index at a multi-index, -1 if outside the box or masked.
  long active_at(const std::array<int, 3>& idx) const;

  Vec node_coords(std::size_t node) const;
  Vec active_coords(std::size_t k) const { return node_coords(node_of_active(k)); }

  /// Number of cells from the active node to the nearest masked node along
  /// the grid axes (capped at 3). Nodes with depth >= 2 use central 5-point
  /// stencils on every axis.
  int stencil_depth(std::size_t k) const { return depth_[k]; }

  const AxisStencil& axis_stencil(std::size_t k, int axis) const {
    return stencils_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(axis)];
  }

 private:
  int dim_;
  int resolution_;
  double h_;
  double margin_;
  Vec lo_;
  std::array<int, 3> counts_{1, 1, 1};
  std::vector<std::size_t> active_nodes_;
  std::vector<long> active_of_node_;
  std::vector<int> depth_;
  std::vector<AxisStencil> stencils_;
};

/// First and second derivatives along one axis at every active node:
/// 5-point central where the stencil fits, 3-point central next, and
/// second-order one-sided at the mask edge.
void axis_derivatives(const InteriorGrid& grid, std::span<const double> f,
                      int axis, std::vector<double>* d1,
                      std::vector<double>* d2);

/// Jets (value, gradient, Hessian) of a field given on active nodes.
/// Mixed derivatives are composed from the one-dimensional stencils.
std::vector<Jet> grid_jets(const InteriorGrid& grid, std::span<const double> f);

/// Second partial derivatives d^2 f / dx_i dx_j of a field on active nodes.
std::vector<double> grid_second_derivative(const InteriorGrid& grid,
                                           std::span<const double> f, int i,
                                           int j);

/// Tensor cubic Lagrange stencil around an arbitrary point. The 4^m block
/// is shifted inward until all its nodes are active, so points near the
/// mask edge (or on the closure of P) are handled by extrapolation, or,
/// with clamp, by interpolation at the nearest point of the block
/// (`anchor`).
struct InterpolationStencil {
  std::vector<std::size_t> active;  // active indices of the block nodes
  std::vector<double> weights;
  Vec anchor;
  bool clamped = false;

  double apply(std::span<const double> f) const;
  Jet apply(std::span<const Jet> jets) const;
};

InterpolationStencil interpolation_stencil(const InteriorGrid& grid,
                                           const Vec& x, bool clamp = false);

}  // namespace torifano
