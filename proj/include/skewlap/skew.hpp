#pragma once

#include <cstdint>
#include <functional>

#include "skewlap/laplace.hpp"
#include "skewlap/model.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// The correction closure of the signed density gamma_hat_S = (1 + S) gamma_hat,
// S(x) = -(1/6) <grad^3 V(mode), (x - mode)^(x)3>, together with the mean
// shift delta_mode and eps_bar3 = |S|_{L^2(gamma_hat)}.
struct SkewCorrection {
  LaplaceFit fit;
  WhitenedThird tensor;
  vec_t delta_mode;
  double eps_bar3 = 0.0;
};

SkewCorrection make_skew_correction(const PosteriorModel& model, const LaplaceFit& fit,
                                    ThirdMode tensor_mode = ThirdMode::dense);
SkewCorrection make_skew_correction(const PosteriorModel& model, const LaplaceFit& fit,
                                    WhitenedThird tensor);

// S(x), evaluated in whitened coordinates as -(1/6) <T, (L^T(x - mode))^(x)3>.
double eval_skew(const SkewCorrection& sc, const vec_t& x);
// S at whitened coordinate z; exactly odd in z.
double eval_skew_whitened(const SkewCorrection& sc, const vec_t& z);

// mode - (1/2) H_V^{-1} <grad^3 V(mode), H_V^{-1}>; never materialises the
// dense third derivative.
vec_t corrected_mean(const PosteriorModel& model, const LaplaceFit& fit);
vec_t mean_shift(const PosteriorModel& model, const LaplaceFit& fit);  // delta alone

// M_{gamma_hat_S}(u) / M_{gamma_hat}(u) = 1 - <T,u^(x)3>/6 - <T,I>.u/2,
// u in whitened coordinates.
double corrected_mgf_ratio(const SkewCorrection& sc, const vec_t& u);

// Covariance of gamma_hat_S about its own mean: H_V^{-1} - delta delta^T.
mat_t corrected_covariance(const PosteriorModel& model, const LaplaceFit& fit);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  index_t nonfinite = 0;
};

using Observable = std::function<double(const vec_t&)>;

// Monte-Carlo integral of g against gamma_hat_S: mean of g(X)(1 + S(X)) over
// Gaussian draws, with sample standard error. Draws are split over a fixed
// number of shards with per-shard seeds derived from (seed, shard), reduced
// in shard order, so the result does not depend on thread count. Non-finite
// g values are dropped and counted; more than 0.1% of draws aborts.
McEstimate corrected_integral_mc(const SkewCorrection& sc, const LaplaceFit& fit,
                                 const Observable& g, index_t count, std::uint64_t seed,
                                 bool antithetic = false);

}  // namespace skewlap
