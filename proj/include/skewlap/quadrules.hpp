#pragma once

#include "skewlap/types.hpp"

namespace skewlap {

// Nodes and weights for integral_{-1}^{1} f(x) dx (Golub-Welsch).
void gauss_legendre(int m, vec_t& nodes, vec_t& weights);

// Nodes and weights for integral f(x) e^{-x^2} dx (physicists' Hermite).
// E[f(Z)] for Z ~ N(0,1) is (1/sqrt(pi)) sum w_i f(sqrt(2) x_i).
void gauss_hermite(int m, vec_t& nodes, vec_t& weights);

}  // namespace skewlap
