#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "skewlap/laplace.hpp"
#include "skewlap/model.hpp"
#include "skewlap/skew.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// sqrt((1/6)|T|_F^2 + (1/4)|<T, I>|^2); equals |S|_{L^2(gamma_hat)}. The
// low-rank path runs the pairwise double sum over B_l . B_m, the dense path
// reads the tensor directly; both agree.
double eps_bar3(const WhitenedThird& tensor);

struct LtvEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of L_TV = (1/12) E|<T, Z^(x)3>|; deterministic per
// seed with fixed-shard reduction.
LtvEstimate ltv_mc(const WhitenedThird& tensor, index_t count, std::uint64_t seed);

struct OpnormEstimate {
  double estimate = 0.0;
  // best two restarts agree within 1%
  bool converged = false;
};

// Lower estimate of c_k(s) = sup_{x in U(s)} |grad^k v(x)|_{H_v} by
// alternating projected gradient ascent over unit-|u|_{H_v} directions and
// the ball |x - mode|_{H_v} <= s sqrt(d/n), from `restarts` random starts.
// s = 0 skips the x loop. Ties between restarts break toward the lowest
// restart index.
OpnormEstimate weighted_opnorm(const PosteriorModel& model, const LaplaceFit& fit, int k, double s,
                               int restarts, std::uint64_t seed);

struct RadiusSelection {
  double radius = 0.0;
  double radius_floor = 0.0;  // s* = max(s0, (8/c0) log(2e/c0))
  // (eps3^2 + eps4(s)^2) s^4 <= 1 fails already at s*
  bool floor_violates_unit_bound = false;
  // eps3 and eps4 vanish; radius is the upper search limit
  bool degenerate_gaussian = false;
};

// Largest s in [s*, 1e6] with (eps3^2 + eps4(s)^2) s^4 <= 1, found by
// bisection; returns s* with a flag when even the floor violates the bound.
RadiusSelection select_radius(double c0, double s0, double eps3,
                              const std::function<double(double)>& eps4_at);

// Remark-level sufficient condition c3 sqrt(d/n) + c4(4) d/n <= 3/8 that
// licenses the defaults (c0, s0) = (1, 4) for convex v.
bool check_growth_condition(double c3, double c4_at_4, index_t d, double n);

struct BoundValues {
  // every value is modulo an absolute constant (set to 1 here)
  double tv_corrected = 0.0;   // E(s)(eps3^2 + eps4^2) + (a_g v 1) tau(s)
  double tv_leading = 0.0;     // eps_bar3 / 2, bounds L_TV
  double mean_remainder = 0.0; // same shape as tv_corrected, H_V-weighted norm
  std::optional<double> mean_remainder_c5;  // E(s)(e3^2+e4^2)(e3+e4^2) + e5^3/sqrt(d) + tau
  double cov = 0.0;            // E(s)^2 (eps3^2 + eps4^2) + tau(s)
};

struct DiagnosticsReport {
  double eps_bar3 = 0.0;
  double eps3 = 0.0;
  std::optional<double> eps4;
  std::optional<double> eps5;
  double radius = 0.0;
  double radius_floor = 0.0;
  double E_s = 1.0;
  double tau_s = 0.0;
  LtvEstimate ltv_estimate;
  double growth_coeff = 1.0;
  BoundValues bounds;
  bool modulo_absolute_constant = true;
  bool radius_floor_violates_unit_bound = false;
  bool eps3_opnorm_converged = false;

  std::string to_json() const;
};

struct DiagnosticsOptions {
  double s = 0.0;  // <= 0 selects the radius automatically
  int restarts = 10;
  index_t mc_count = 100000;
  double growth_coeff = 1.0;
  std::uint64_t seed = 0;
};

// Computes every report field; missing higher derivatives drop eps4/eps5 and
// the bounds that need them instead of failing.
DiagnosticsReport assemble_report(const PosteriorModel& model, const LaplaceFit& fit,
                                  const SkewCorrection& sc, const DiagnosticsOptions& opts);

}  // namespace skewlap
