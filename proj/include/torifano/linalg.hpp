#pragma once

#include <Eigen/Dense>
#include <vector>

namespace torifano {

// Small dense types with inline storage; m <= 3 covers every supported
// polytope dimension, 2m <= 6 covers the real block embeddings.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using BlockMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;

inline constexpr int kMaxDim = 3;

inline Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Mat sym_part(const Mat& a) { return 0.5 * (a + a.transpose()); }
inline Mat skew_part(const Mat& a) { return 0.5 * (a - a.transpose()); }

/// [[top_left, top_right], [bottom_left, bottom_right]]
BlockMat block2x2(const Mat& tl, const Mat& tr, const Mat& bl, const Mat& br);

/// Real embedding [[G, -B], [B, G]] of the Hermitian matrix G + iB.
BlockMat hermitian_embedding(const Mat& g, const Mat& b);

}  // namespace torifano
