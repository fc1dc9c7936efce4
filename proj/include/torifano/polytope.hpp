#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "torifano/linalg.hpp"

namespace torifano {

/// Affine function L(x) = <normal, x> + offset with a primitive lattice normal.
struct Label {
  std::vector<int> normal;
  double offset = 1.0;

  double eval(const Vec& x) const;
  Vec normal_vec() const;
};

/// Labelled Delzant polytope {x : L_j(x) >= 0 for all j}.
///
/// Built from labels only; vertices are derived. Immutable after
/// construction.
class DelzantPolytope {
 public:
  /// Validates the labels and enumerates vertices. Throws Error with kind
  /// NotDelzant, Unbounded, Empty or NotBarycentred.
  static DelzantPolytope build(std::vector<Label> labels, bool fano_mode);

  int dim() const { return dim_; }
  std::size_t num_labels() const { return labels_.size(); }
  const std::vector<Label>& labels() const { return labels_; }
  const Label& label(std::size_t j) const { return labels_[j]; }
  const Vec& normal(std::size_t j) const { return normals_[j]; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  bool barycentred() const { return barycentred_; }

  /// Indices of the labels vanishing at vertex k.
  const std::vector<int>& vertex_facets(std::size_t k) const {
    return vertex_facets_[k];
  }
  /// Vertices (indices) of facet j, ordered along the facet.
  const std::vector<int>& facet_vertices(std::size_t j) const {
    return facet_vertices_[j];
  }

  double L(std::size_t j, const Vec& x) const;
  double min_L(const Vec& x) const;
  /// Smallest Euclidean distance to the supporting hyperplanes (negative
  /// outside the polytope).
  double distance_to_boundary(const Vec& x) const;
  bool contains(const Vec& x) const { return min_L(x) >= 0.0; }
  bool interior(const Vec& x) const { return min_L(x) > 0.0; }

  const Vec& box_lo() const { return box_lo_; }
  const Vec& box_hi() const { return box_hi_; }
  double min_normal_norm() const { return min_normal_norm_; }

 private:
  int dim_ = 0;
  bool barycentred_ = false;
  std::vector<Label> labels_;
  std::vector<Vec> normals_;
  std::vector<double> normal_norms_;
  std::vector<Vec> vertices_;
  std::vector<std::vector<int>> vertex_facets_;
  std::vector<std::vector<int>> facet_vertices_;
  Vec box_lo_;
  Vec box_hi_;
  double min_normal_norm_ = 1.0;
};

/// Named Fano presets: "cp1", "cp1xcp1", "cp2".
DelzantPolytope preset(std::string_view name);
std::vector<Label> preset_labels(std::string_view name);

using ScalarField = std::function<double(const Vec&)>;

/// Interior and facet quadrature over a polytope. Interior nodes lie
/// strictly inside; boundary nodes lie on the facets and carry the
/// dsigma_L measure.
struct PolytopeQuadrature {
  std::vector<Vec> interior_nodes;
  std::vector<double> interior_weights;
  /// facet_nodes[j], facet_weights[j]: rule on facet j.
  std::vector<std::vector<Vec>> facet_nodes;
  std::vector<std::vector<double>> facet_weights;
  int order = 0;
  double grading = 0.0;
  int levels = 0;

  double volume() const;
  double boundary_measure() const;
  double facet_measure(std::size_t j) const;
  std::size_t num_boundary_nodes() const;
};

/// Gauss rules on a uniform cell grid clipped to P, with dyadic refinement
/// of cells within `grading` cells of the boundary. Requires resolution >= 8.
PolytopeQuadrature build_quadrature(const DelzantPolytope& p, int resolution,
                                    double grading = 5.0, int levels = 3);

/// a = 2 Vol(dP, dsigma_L) / Vol(P, dx), measured on the quadrature.
double futaki_constant(const PolytopeQuadrature& q);

/// F(f) = -a int_P f dx + 2 int_dP f dsigma_L.
double futaki(const DelzantPolytope& p, const PolytopeQuadrature& q,
              const ScalarField& f);

/// Same as futaki_constant but requires a barycentred polytope; the result
/// should equal 2m.
double normalization_constant(const DelzantPolytope& p,
                              const PolytopeQuadrature& q);

}  // namespace torifano
