#pragma once

#include "skewlap/laplace.hpp"
#include "skewlap/model.hpp"
#include "skewlap/skew.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// Tensorized Gauss-Legendre rule over a whitened box [-h, h]^d centred at the
// mode. Points where the model's domain guard fails carry zero density, which
// clips Dirichlet boxes to the simplex.
struct QuadratureGrid {
  vec_t nodes;    // per-axis, already scaled to [-h, h]
  vec_t weights;  // per-axis
  double half_width = 12.0;
  int nodes_per_axis = 0;
};

QuadratureGrid make_grid(int nodes_per_axis, double half_width = 12.0);
// defaults 400 / 200 / 80 nodes per axis for d = 1 / 2 / 3
QuadratureGrid default_grid(index_t d);

// integral g dpi with pi normalised on the same grid; d <= 3.
double true_integral(const PosteriorModel& model, const LaplaceFit& fit, const Observable& g,
                     const QuadratureGrid& grid);

// One-pass normalised posterior mean (the g(x) = x case).
vec_t true_mean(const PosteriorModel& model, const LaplaceFit& fit, const QuadratureGrid& grid);

enum class TvAgainst { laplace, skew_corrected };

// (1/2) sum w |pi - q| with q the gamma_hat density or the signed
// (1 + S) gamma_hat density.
double true_tv(const PosteriorModel& model, const LaplaceFit& fit, TvAgainst against,
               const QuadratureGrid& grid, const SkewCorrection* sc = nullptr);

// P_pi(a . x >= a . mode). The grid is rotated so the half-space boundary is a
// node-axis plane, keeping the integrand smooth on each sub-box.
double true_halfspace_prob(const PosteriorModel& model, const LaplaceFit& fit, const vec_t& normal,
                           const QuadratureGrid& grid);

}  // namespace skewlap
