#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>

namespace skewlap {

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar, Rows, Cols>;

template <class Scalar, int Rows = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar, Rows, 1>;

using scalar_t = double;
using vec_t = vec_type<scalar_t>;
using mat_t = mat_type<scalar_t>;
using index_t = Eigen::Index;

}  // namespace skewlap
