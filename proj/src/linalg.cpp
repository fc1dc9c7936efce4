#include "torifano/linalg.hpp"

namespace torifano {

BlockMat block2x2(const Mat& tl, const Mat& tr, const Mat& bl, const Mat& br) {
  const Eigen::Index m = tl.rows();
  BlockMat out(2 * m, 2 * m);
  out.topLeftCorner(m, m) = tl;
  out.topRightCorner(m, m) = tr;
  out.bottomLeftCorner(m, m) = bl;
  out.bottomRightCorner(m, m) = br;
  return out;
}

BlockMat hermitian_embedding(const Mat& g, const Mat& b) {
  return block2x2(g, -b, b, g);
}

}  // namespace torifano
