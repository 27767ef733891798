#include "skewlap/skew.hpp"

#include <cmath>

#include "skewlap/diagnostics.hpp"
#include "skewlap/errors.hpp"
#include "skewlap/rng.hpp"

namespace skewlap {

SkewCorrection make_skew_correction(const PosteriorModel& model, const LaplaceFit& fit,
                                    WhitenedThird tensor) {
  SkewCorrection sc{fit, std::move(tensor), mean_shift(model, fit), 0.0};
  sc.eps_bar3 = eps_bar3(sc.tensor);
  return sc;
}

SkewCorrection make_skew_correction(const PosteriorModel& model, const LaplaceFit& fit,
                                    ThirdMode tensor_mode) {
  return make_skew_correction(model, fit, whitened_third(model, fit, tensor_mode));
}

double eval_skew_whitened(const SkewCorrection& sc, const vec_t& z) {
  return -sc.tensor.contract_cube(z) / 6.0;
}

double eval_skew(const SkewCorrection& sc, const vec_t& x) {
  return eval_skew_whitened(sc, sc.fit.whiten(x));
}

vec_t mean_shift(const PosteriorModel& model, const LaplaceFit& fit) {
  const mat_t hinv = fit.covariance();
  return -0.5 * fit.solve_hess(model.third_mat(fit.mode, hinv));
}

vec_t corrected_mean(const PosteriorModel& model, const LaplaceFit& fit) {
  return fit.mode + mean_shift(model, fit);
}

double corrected_mgf_ratio(const SkewCorrection& sc, const vec_t& u) {
  return 1.0 - sc.tensor.contract_cube(u) / 6.0 - sc.tensor.contract_eye().dot(u) / 2.0;
}

mat_t corrected_covariance(const PosteriorModel& model, const LaplaceFit& fit) {
  const vec_t delta = mean_shift(model, fit);
  return fit.covariance() - delta * delta.transpose();
}

McEstimate corrected_integral_mc(const SkewCorrection& sc, const LaplaceFit& fit,
                                 const Observable& g, index_t count, std::uint64_t seed,
                                 bool antithetic) {
  if (count < 2) throw ArgumentError("corrected_integral_mc: count must be >= 2");
  const index_t d = fit.dim();
  const index_t shards = 64;

  double sum = 0.0, sumsq = 0.0;
  index_t used = 0, nonfinite = 0;
  vec_t z(d);
  for (index_t s = 0; s < shards; ++s) {
    const index_t lo = s * count / shards, hi = (s + 1) * count / shards;
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(s));
    double ssum = 0.0, ssumsq = 0.0;
    vec_t paired(d);
    for (index_t r = lo; r < hi; ++r) {
      if (antithetic && ((r - lo) & 1)) {
        z = -paired;
      } else {
        for (index_t i = 0; i < d; ++i) z[i] = rng.next_normal();
        if (antithetic) paired = z;
      }
      const double w = 1.0 + eval_skew_whitened(sc, z);
      const double val = g(fit.unwhiten(z)) * w;
      if (!std::isfinite(val)) {
        ++nonfinite;
        continue;
      }
      ssum += val;
      ssumsq += val * val;
      ++used;
    }
    sum += ssum;
    sumsq += ssumsq;
  }

  if (nonfinite * 1000 > count)
    throw NumericalError("corrected_integral_mc: " + std::to_string(nonfinite) + " of " +
                         std::to_string(count) + " draws were non-finite");
  McEstimate out;
  out.nonfinite = nonfinite;
  out.estimate = sum / static_cast<double>(used);
  const double var =
      std::max(0.0, (sumsq - static_cast<double>(used) * out.estimate * out.estimate) /
                        static_cast<double>(used - 1));
  out.std_error = std::sqrt(var / static_cast<double>(used));
  return out;
}

}  // namespace skewlap
