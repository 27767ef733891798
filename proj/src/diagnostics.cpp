#include "skewlap/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "skewlap/errors.hpp"
#include "skewlap/rng.hpp"

namespace skewlap {

double eps_bar3(const WhitenedThird& tensor) {
  const double frob_sq = tensor.frobenius_sq();
  const double eye_sq = tensor.contract_eye().squaredNorm();
  return std::sqrt(frob_sq / 6.0 + eye_sq / 4.0);
}

LtvEstimate ltv_mc(const WhitenedThird& tensor, index_t count, std::uint64_t seed) {
  if (count < 2) throw ArgumentError("ltv_mc: count must be >= 2");
  const index_t d = tensor.dim();
  const index_t shards = 64;
  // densify low-rank tensors when the total contraction work favours it:
  // low-rank costs ~count*n*d, dense costs ~n*d^3/6 to build plus count*d^3
  const WhitenedThird* t = &tensor;
  WhitenedThird densified = tensor;
  if (tensor.is_low_rank() && d <= 128) {
    const double n = static_cast<double>(tensor.vectors().rows());
    const double cnt = static_cast<double>(count);
    const double dd = static_cast<double>(d);
    if (n * dd * dd * dd / 6.0 + cnt * dd * dd * dd < cnt * n * dd) {
      densified = tensor.densified();
      t = &densified;
    }
  }

  double sum = 0.0, sumsq = 0.0;
  for (index_t s = 0; s < shards; ++s) {
    const index_t lo = s * count / shards, hi = (s + 1) * count / shards;
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(s));
    index_t r = lo;
    while (r < hi) {
      const index_t m = std::min<index_t>(512, hi - r);
      mat_t Z(m, d);
      for (index_t i = 0; i < m; ++i)
        for (index_t j = 0; j < d; ++j) Z(i, j) = rng.next_normal();
      const vec_t c = t->contract_cube_rows(Z);
      for (index_t i = 0; i < m; ++i) {
        const double val = std::abs(c[i]) / 12.0;
        sum += val;
        sumsq += val * val;
      }
      r += m;
    }
  }
  LtvEstimate est;
  est.value = sum / static_cast<double>(count);
  const double var =
      std::max(0.0, (sumsq - static_cast<double>(count) * est.value * est.value) /
                        static_cast<double>(count - 1));
  est.std_error = std::sqrt(var / static_cast<double>(count));
  return est;
}

namespace {

// k-fold directional derivative with the direction repeated; last slot may
// differ (for gradient probes).
double kdir(const PosteriorModel& m, int k, const vec_t& x, const vec_t& a, const vec_t& b) {
  switch (k) {
    case 3: return m.third_dir(x, a, a, b);
    case 4: return m.fourth_dir(x, a, a, a, b);
    case 5: return m.fifth_dir(x, a, a, a, a, b);
    default: throw ArgumentError("weighted_opnorm: k must be 3, 4 or 5");
  }
}

struct OpnormProblem {
  const PosteriorModel& model;
  const LaplaceFit& fit;
  int k;
  double rho;   // whitened x-ball radius s*sqrt(d)
  mat_t linvt;  // columns of L^{-T}

  vec_t to_x(const vec_t& zeta) const { return fit.unwhiten(zeta); }
  vec_t to_dir(const vec_t& uhat) const { return linvt * uhat; }

  double f(const vec_t& zeta, const vec_t& uhat) const {
    return kdir(model, k, to_x(zeta), to_dir(uhat), to_dir(uhat));
  }

  // d/duhat of f, via k contractions against the whitened basis
  vec_t grad_u(const vec_t& zeta, const vec_t& uhat) const {
    const index_t d = uhat.size();
    const vec_t x = to_x(zeta);
    const vec_t a = to_dir(uhat);
    vec_t g(d);
    for (index_t i = 0; i < d; ++i)
      g[i] = static_cast<double>(k) * kdir(model, k, x, a, linvt.col(i));
    return g;
  }
};

// Line-searched ascent of |f| over the unit sphere in uhat.
double ascend_u(const OpnormProblem& p, const vec_t& zeta, vec_t& uhat, int iters) {
  double best = std::abs(p.f(zeta, uhat));
  double step = 1.0;
  for (int it = 0; it < iters; ++it) {
    const double fval = p.f(zeta, uhat);
    const double sgn = fval >= 0.0 ? 1.0 : -1.0;
    vec_t g = sgn * p.grad_u(zeta, uhat);
    g -= g.dot(uhat) * uhat;
    const double gn = g.norm();
    if (gn < 1e-14 * (1.0 + best)) break;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      vec_t trial = (uhat + step * g).normalized();
      const double ft = std::abs(p.f(zeta, trial));
      if (ft > best * (1.0 + 1e-12) + 1e-300) {
        uhat = trial;
        best = ft;
        step = std::min(step * 2.0, 1e6);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return best;
}

// Projected ascent of |f| over the whitened ball, finite-difference gradient.
double ascend_x(const OpnormProblem& p, vec_t& zeta, const vec_t& uhat, int iters) {
  const index_t d = zeta.size();
  double best = std::abs(p.f(zeta, uhat));
  double step = 0.1 * (1.0 + p.rho);
  auto project = [&](vec_t z) {
    const double zn = z.norm();
    if (zn > p.rho) z *= p.rho / zn;
    return z;
  };
  for (int it = 0; it < iters; ++it) {
    const double fval = p.f(zeta, uhat);
    const double sgn = fval >= 0.0 ? 1.0 : -1.0;
    vec_t g(d);
    const double h = 1e-6 * (1.0 + zeta.norm());
    for (index_t i = 0; i < d; ++i) {
      vec_t zp = zeta, zm = zeta;
      zp[i] += h;
      zm[i] -= h;
      zp = project(zp);
      zm = project(zm);
      double fp, fm;
      try {
        fp = p.f(zp, uhat);
        fm = p.f(zm, uhat);
      } catch (...) {
        g[i] = 0.0;
        continue;
      }
      g[i] = sgn * (fp - fm) / (2.0 * h);
    }
    const double gn = g.norm();
    if (gn < 1e-12 * (1.0 + best)) break;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      vec_t trial = project(zeta + step * g);
      if (p.model.domain_guard(p.to_x(trial))) {
        const double ft = std::abs(p.f(trial, uhat));
        if (ft > best * (1.0 + 1e-12) + 1e-300) {
          zeta = trial;
          best = ft;
          step = std::min(step * 2.0, 10.0 * (1.0 + p.rho));
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return best;
}

}  // namespace

OpnormEstimate weighted_opnorm(const PosteriorModel& model, const LaplaceFit& fit, int k, double s,
                               int restarts, std::uint64_t seed) {
  if (k != 3 && k != 4 && k != 5) throw ArgumentError("weighted_opnorm: k must be 3, 4 or 5");
  if (s < 0.0) throw ArgumentError("weighted_opnorm: s must be >= 0");
  if (k == 4 && !model.has_fourth())
    throw UnsupportedRepresentationError("weighted_opnorm: model lacks fourth derivative");
  if (k == 5 && !model.has_fifth())
    throw UnsupportedRepresentationError("weighted_opnorm: model lacks fifth derivative");
  if (restarts < 1) throw ArgumentError("weighted_opnorm: restarts must be >= 1");

  const index_t d = fit.dim();
  const double n = fit.model_n;
  OpnormProblem prob{model, fit, k, s * std::sqrt(static_cast<double>(d)),
                     fit.factor.transpose().triangularView<Eigen::Upper>().solve(
                         mat_t::Identity(d, d))};

  std::vector<double> values(restarts, 0.0);
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(r));
    vec_t uhat = rng.normal_vec(d).normalized();
    vec_t zeta = vec_t::Zero(d);
    if (s > 0.0 && r % 2 == 1) {
      // half the restarts also start away from the mode
      zeta = rng.normal_vec(d);
      const double frac = std::pow(rng.next_double(), 1.0 / static_cast<double>(d));
      zeta *= prob.rho * frac / std::max(zeta.norm(), 1e-300);
      if (!model.domain_guard(prob.to_x(zeta))) zeta.setZero();
    }
    double best = 0.0;
    for (int outer = 0; outer < 40; ++outer) {
      const double before = best;
      best = ascend_u(prob, zeta, uhat, 60);
      if (s > 0.0) best = ascend_x(prob, zeta, uhat, 30);
      if (best <= before * (1.0 + 1e-10) + 1e-300) break;
    }
    values[r] = best;
  }

  // lowest restart index wins ties
  int best_idx = 0;
  for (int r = 1; r < restarts; ++r)
    if (values[r] > values[best_idx]) best_idx = r;
  double second = -1.0;
  for (int r = 0; r < restarts; ++r)
    if (r != best_idx) second = std::max(second, values[r]);

  OpnormEstimate est;
  est.estimate = std::pow(n, 0.5 * k - 1.0) * values[best_idx];
  est.converged = restarts >= 2 &&
                  std::abs(values[best_idx] - second) <= 0.01 * std::max(values[best_idx], 1e-300);
  return est;
}

RadiusSelection select_radius(double c0, double s0, double eps3,
                              const std::function<double(double)>& eps4_at) {
  if (!(c0 > 0.0 && c0 <= 1.0)) throw ArgumentError("select_radius: c0 must be in (0, 1]");
  if (!(s0 > 0.0)) throw ArgumentError("select_radius: s0 must be > 0");

  RadiusSelection sel;
  sel.radius_floor = std::max(s0, (8.0 / c0) * std::log(2.0 * std::exp(1.0) / c0));

  auto exceeds = [&](double s) {
    const double e4 = eps4_at ? eps4_at(s) : 0.0;
    return (eps3 * eps3 + e4 * e4) * s * s * s * s > 1.0;
  };

  const double upper = 1e6;
  if (exceeds(sel.radius_floor)) {
    sel.radius = sel.radius_floor;
    sel.floor_violates_unit_bound = true;
    return sel;
  }
  if (!exceeds(upper)) {
    sel.radius = upper;
    sel.degenerate_gaussian = true;
    return sel;
  }
  double lo = sel.radius_floor, hi = upper;
  for (int it = 0; it < 80 && (hi - lo) > 1e-9 * std::max(1.0, lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (exceeds(mid))
      hi = mid;
    else
      lo = mid;
  }
  sel.radius = lo;
  return sel;
}

bool check_growth_condition(double c3, double c4_at_4, index_t d, double n) {
  if (c3 < 0.0 || c4_at_4 < 0.0 || n <= 0.0) throw ArgumentError("check_growth_condition: bad input");
  const double dn = static_cast<double>(d) / n;
  return c3 * std::sqrt(dn) + c4_at_4 * dn <= 3.0 / 8.0;
}

DiagnosticsReport assemble_report(const PosteriorModel& model, const LaplaceFit& fit,
                                  const SkewCorrection& sc, const DiagnosticsOptions& opts) {
  DiagnosticsReport rep;
  const index_t d = fit.dim();
  const double n = fit.model_n;
  const double dn = static_cast<double>(d) / std::sqrt(n);

  rep.growth_coeff = opts.growth_coeff;
  rep.eps_bar3 = sc.eps_bar3;

  const OpnormEstimate c3 = weighted_opnorm(model, fit, 3, 0.0, opts.restarts, opts.seed);
  rep.eps3 = c3.estimate * dn;
  rep.eps3_opnorm_converged = c3.converged;

  std::function<double(double)> eps4_at;
  if (model.has_fourth()) {
    eps4_at = [&](double s) {
      const OpnormEstimate c4 =
          weighted_opnorm(model, fit, 4, s, opts.restarts, Rng::mix(opts.seed + 4));
      return std::sqrt(c4.estimate) * dn;
    };
  }

  RadiusSelection sel = select_radius(fit.c0, fit.s0, rep.eps3, eps4_at);
  rep.radius_floor = sel.radius_floor;
  if (opts.s > 0.0) {
    rep.radius = opts.s;
    const double e4r = eps4_at ? eps4_at(opts.s) : 0.0;
    rep.radius_floor_violates_unit_bound =
        (rep.eps3 * rep.eps3 + e4r * e4r) * std::pow(opts.s, 4) > 1.0;
  } else {
    rep.radius = sel.radius;
    rep.radius_floor_violates_unit_bound = sel.floor_violates_unit_bound;
  }

  if (model.has_fourth()) rep.eps4 = eps4_at(rep.radius);
  if (model.has_fifth()) {
    const OpnormEstimate c5 =
        weighted_opnorm(model, fit, 5, rep.radius, opts.restarts, Rng::mix(opts.seed + 5));
    rep.eps5 = std::cbrt(c5.estimate) * dn;
  }

  const double e3 = rep.eps3;
  const double e4 = rep.eps4.value_or(0.0);
  const double s = rep.radius;
  rep.E_s = std::exp((e3 * e3 + e4 * e4) * s * s * s * s);
  rep.tau_s = static_cast<double>(d) * std::exp(-fit.c0 * s * static_cast<double>(d) / 8.0);

  rep.ltv_estimate = ltv_mc(sc.tensor, opts.mc_count, Rng::mix(opts.seed + 12));

  const double ag1 = std::max(1.0, opts.growth_coeff);
  const double core = rep.E_s * (e3 * e3 + e4 * e4);
  rep.bounds.tv_corrected = core + ag1 * rep.tau_s;
  rep.bounds.tv_leading = rep.eps_bar3 / 2.0;
  rep.bounds.mean_remainder = core + ag1 * rep.tau_s;
  if (rep.eps5) {
    const double e5 = *rep.eps5;
    rep.bounds.mean_remainder_c5 = rep.E_s * (e3 * e3 + e4 * e4) * (e3 + e4 * e4) +
                                   e5 * e5 * e5 / std::sqrt(static_cast<double>(d)) +
                                   ag1 * rep.tau_s;
  }
  rep.bounds.cov = rep.E_s * core + ag1 * rep.tau_s;
  return rep;
}

std::string DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["eps_bar3"] = eps_bar3;
  j["eps3"] = eps3;
  j["eps4"] = eps4 ? nlohmann::json(*eps4) : nlohmann::json(nullptr);
  j["eps5"] = eps5 ? nlohmann::json(*eps5) : nlohmann::json(nullptr);
  j["radius"] = radius;
  j["radius_floor"] = radius_floor;
  j["E_s"] = E_s;
  j["tau_s"] = tau_s;
  j["ltv_estimate"] = {{"value", ltv_estimate.value}, {"std_error", ltv_estimate.std_error}};
  j["growth_coeff"] = growth_coeff;
  nlohmann::json b;
  b["tv_corrected"] = bounds.tv_corrected;
  b["tv_leading"] = bounds.tv_leading;
  b["mean_remainder"] = bounds.mean_remainder;
  b["mean_remainder_c5"] =
      bounds.mean_remainder_c5 ? nlohmann::json(*bounds.mean_remainder_c5) : nlohmann::json(nullptr);
  b["cov"] = bounds.cov;
  j["bounds"] = b;
  j["modulo_absolute_constant"] = modulo_absolute_constant;
  j["radius_floor_violates_unit_bound"] = radius_floor_violates_unit_bound;
  j["eps3_opnorm_converged"] = eps3_opnorm_converged;
  return j.dump(2);
}

}  // namespace skewlap
