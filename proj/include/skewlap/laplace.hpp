#pragma once

#include <cstdint>
#include <vector>

#include "skewlap/model.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

struct ModeResult {
  vec_t mode;
  int iterations = 0;
  bool converged = false;
  // Hessian-not-PD iterations that fell back to a gradient step.
  int gradient_fallbacks = 0;
  // Set when the iterates ran off to |x| > 1e6 (flat-prior separation etc).
  bool diverged = false;
};

// Damped Newton with Armijo backtracking (c = 1e-4) on V; the line search
// never steps outside the model's domain guard. grad_tol <= 0 selects the
// default 1e-10 * sqrt(d), measured as |H_V^{-1/2} grad V|.
ModeResult find_mode(const PosteriorModel& model, const vec_t& x0, int max_iter = 200,
                     double grad_tol = 0.0);

// gamma_hat = N(mode, H_V^{-1}) with H_V factored once as L L^T.
struct LaplaceFit {
  vec_t mode;
  mat_t hess;        // H_V = grad^2 V(mode)
  mat_t factor;      // lower-triangular L with L L^T = H_V
  double log_det_hess = 0.0;
  double model_n = 1.0;  // n in V = n*v
  double c0 = 1.0;       // growth constants of the linear tail condition
  double s0 = 4.0;

  index_t dim() const { return mode.size(); }

  // z = L^T (x - mode): whitened coordinates in which gamma_hat is standard
  // normal.
  vec_t whiten(const vec_t& x) const;
  // x = mode + L^{-T} z
  vec_t unwhiten(const vec_t& z) const;
  // |x|_{H_V} of a displacement vector.
  double hv_norm(const vec_t& delta) const;
  // H_V^{-1} b via two triangular solves.
  vec_t solve_hess(const vec_t& b) const;
  mat_t covariance() const;  // H_V^{-1}
};

LaplaceFit fit_laplace(const PosteriorModel& model, const vec_t& mode, double c0 = 1.0,
                       double s0 = 4.0);

// Lower-triangular Cholesky; throws NotPositiveDefiniteError naming the
// smallest pivot encountered when the matrix is not PD.
mat_t cholesky_lower(const mat_t& A);

enum class ThirdMode { dense, low_rank };

// T = grad^3 W(0) for W(x) = V(mode + L^{-T} x); either a dense symmetric
// order-3 tensor or a weighted sum of rank-1 cubes sum_l a_l B_l^(x)3.
class WhitenedThird {
 public:
  static WhitenedThird zero(index_t d);
  static WhitenedThird from_dense(index_t d, std::vector<double> entries);
  static WhitenedThird from_low_rank(vec_t weights, mat_t vectors);

  index_t dim() const { return dim_; }
  bool is_low_rank() const { return low_rank_; }
  const vec_t& weights() const { return weights_; }
  const mat_t& vectors() const { return vectors_; }

  double contract(const vec_t& u, const vec_t& v, const vec_t& w) const;
  double contract_cube(const vec_t& z) const;  // <T, z^(x)3>
  vec_t contract_eye() const;                  // <T, I_d>
  double frobenius_sq() const;

  // <T, z_r^(x)3> for every row of a draw batch; O(m d^3) dense via matrix
  // products, O(m n d) low-rank.
  vec_t contract_cube_rows(const mat_t& Z) const;

  // Dense copy of a low-rank tensor (used where per-draw cost matters).
  WhitenedThird densified() const;

  // entries in dense storage, index i + d*(j + d*k)
  const std::vector<double>& dense() const { return dense_; }

 private:
  index_t dim_ = 0;
  bool low_rank_ = false;
  std::vector<double> dense_;
  vec_t weights_;
  mat_t vectors_;  // rows B_l
};

// Whitened third-derivative tensor of the model at the fitted mode. Dense
// mode refuses d above dense_cap; low_rank requires the model to advertise
// rank-1 structure.
WhitenedThird whitened_third(const PosteriorModel& model, const LaplaceFit& fit,
                             ThirdMode mode = ThirdMode::dense, index_t dense_cap = 128);

// count x d matrix of draws mode + L^{-T} z; bit-for-bit reproducible per
// seed on one platform.
mat_t sample_gaussian(const LaplaceFit& fit, index_t count, std::uint64_t seed);

}  // namespace skewlap
