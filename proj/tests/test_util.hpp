#pragma once

#include <Eigen/Core>

namespace sacr2::test {

template <typename A, typename B>
bool same_bits(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         a.derived().cwiseEqual(b.derived()).all();
}

}  // namespace sacr2::test
