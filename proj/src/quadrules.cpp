#include "skewlap/quadrules.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "skewlap/errors.hpp"

namespace skewlap {

namespace {

// Eigen-decompose the symmetric tridiagonal Jacobi matrix with zero diagonal
// and the given off-diagonal; nodes are the eigenvalues and each weight is
// mu0 * (first eigenvector component)^2.
void golub_welsch(const vec_t& offdiag, double mu0, vec_t& nodes, vec_t& weights) {
  const index_t m = offdiag.size() + 1;
  mat_t J = mat_t::Zero(m, m);
  for (index_t i = 0; i + 1 < m; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
  Eigen::SelfAdjointEigenSolver<mat_t> es(J);
  nodes = es.eigenvalues();
  weights.resize(m);
  for (index_t i = 0; i < m; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
}

}  // namespace

void gauss_legendre(int m, vec_t& nodes, vec_t& weights) {
  if (m < 1) throw ArgumentError("gauss_legendre: m must be >= 1");
  vec_t off(m - 1);
  for (int k = 1; k < m; ++k) {
    const double kk = static_cast<double>(k);
    off[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  golub_welsch(off, 2.0, nodes, weights);
}

void gauss_hermite(int m, vec_t& nodes, vec_t& weights) {
  if (m < 1) throw ArgumentError("gauss_hermite: m must be >= 1");
  vec_t off(m - 1);
  for (int k = 1; k < m; ++k) off[k - 1] = std::sqrt(0.5 * static_cast<double>(k));
  golub_welsch(off, std::sqrt(3.14159265358979323846264338327950288), nodes, weights);
}

}  // namespace skewlap
