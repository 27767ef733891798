#include "skewlap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/QR>

#include "skewlap/errors.hpp"
#include "skewlap/quadrules.hpp"

namespace skewlap {

QuadratureGrid make_grid(int nodes_per_axis, double half_width) {
  if (nodes_per_axis < 2) throw ArgumentError("grid: nodes_per_axis must be >= 2");
  if (half_width < 10.0) throw ArgumentError("grid: box must cover at least 10 whitened sds");
  QuadratureGrid g;
  g.nodes_per_axis = nodes_per_axis;
  g.half_width = half_width;
  gauss_legendre(nodes_per_axis, g.nodes, g.weights);
  g.nodes *= half_width;
  g.weights *= half_width;
  return g;
}

QuadratureGrid default_grid(index_t d) {
  switch (d) {
    case 1: return make_grid(400);
    case 2: return make_grid(200);
    case 3: return make_grid(80);
    default: throw UnsupportedRepresentationError("quadrature oracle supports d <= 3 only");
  }
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// Odometer over the tensor grid; f(z, w) gets the whitened point and weight.
template <typename F>
void for_each_point(index_t d, const vec_t& nodes, const vec_t& weights, F&& f) {
  const index_t m = nodes.size();
  std::vector<index_t> idx(static_cast<std::size_t>(d), 0);
  vec_t z(d);
  while (true) {
    double w = 1.0;
    for (index_t a = 0; a < d; ++a) {
      z[a] = nodes[idx[static_cast<std::size_t>(a)]];
      w *= weights[idx[static_cast<std::size_t>(a)]];
    }
    f(z, w);
    index_t a = 0;
    while (a < d) {
      if (++idx[static_cast<std::size_t>(a)] < m) break;
      idx[static_cast<std::size_t>(a)] = 0;
      ++a;
    }
    if (a == d) break;
  }
}

void require_small_d(index_t d) {
  if (d > 3) throw UnsupportedRepresentationError("quadrature oracle supports d <= 3 only");
}

}  // namespace

double true_integral(const PosteriorModel& model, const LaplaceFit& fit, const Observable& g,
                     const QuadratureGrid& grid) {
  const index_t d = fit.dim();
  require_small_d(d);
  const double vhat = model.value(fit.mode);
  double num = 0.0, den = 0.0;
  for_each_point(d, grid.nodes, grid.weights, [&](const vec_t& z, double w) {
    const vec_t x = fit.unwhiten(z);
    if (!model.domain_guard(x)) return;
    const double dens = std::exp(vhat - model.value(x));
    if (dens == 0.0) return;
    den += w * dens;
    num += w * dens * g(x);
  });
  if (den <= 0.0) throw NumericalError("true_integral: zero normalising mass on the grid");
  return num / den;
}

vec_t true_mean(const PosteriorModel& model, const LaplaceFit& fit, const QuadratureGrid& grid) {
  const index_t d = fit.dim();
  require_small_d(d);
  const double vhat = model.value(fit.mode);
  vec_t num = vec_t::Zero(d);
  double den = 0.0;
  for_each_point(d, grid.nodes, grid.weights, [&](const vec_t& z, double w) {
    const vec_t x = fit.unwhiten(z);
    if (!model.domain_guard(x)) return;
    const double dens = std::exp(vhat - model.value(x));
    if (dens == 0.0) return;
    den += w * dens;
    num += (w * dens) * x;
  });
  if (den <= 0.0) throw NumericalError("true_mean: zero normalising mass on the grid");
  return num / den;
}

namespace {

// The TV integrand |p - q| has kinks on the sign-change set of p - q, which
// caps plain tensor Gauss-Legendre around 1e-5..1e-6. In one dimension the
// sign changes are isolated roots: bracket them on the grid, bisect, and
// integrate each smooth piece with its own Gauss rule.
double tv_1d_rootsplit(const std::function<double(double)>& diff, const QuadratureGrid& grid) {
  const index_t m = grid.nodes.size();
  std::vector<double> cuts;
  cuts.push_back(-grid.half_width);
  double prev_z = -grid.half_width, prev_f = diff(prev_z);
  for (index_t i = 0; i <= m; ++i) {
    const double z = i < m ? grid.nodes[i] : grid.half_width;
    const double f = diff(z);
    if ((prev_f < 0.0 && f > 0.0) || (prev_f > 0.0 && f < 0.0)) {
      double lo = prev_z, hi = z, flo = prev_f;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = diff(mid);
        if ((flo < 0.0) == (fm < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    prev_z = z;
    prev_f = f;
  }
  cuts.push_back(grid.half_width);

  vec_t gx, gw;
  gauss_legendre(64, gx, gw);
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (index_t i = 0; i < gx.size(); ++i)
      acc += half * gw[i] * std::abs(diff(mid + half * gx[i]));
  }
  return 0.5 * acc;
}

}  // namespace

double true_tv(const PosteriorModel& model, const LaplaceFit& fit, TvAgainst against,
               const QuadratureGrid& grid, const SkewCorrection* sc) {
  const index_t d = fit.dim();
  require_small_d(d);
  SkewCorrection local;
  if (against == TvAgainst::skew_corrected && sc == nullptr) {
    local = make_skew_correction(model, fit);
    sc = &local;
  }
  const double vhat = model.value(fit.mode);

  // pass 1: normalisation of pi on the grid
  double den = 0.0;
  for_each_point(d, grid.nodes, grid.weights, [&](const vec_t& z, double w) {
    const vec_t x = fit.unwhiten(z);
    if (!model.domain_guard(x)) return;
    den += w * std::exp(vhat - model.value(x));
  });
  if (den <= 0.0) throw NumericalError("true_tv: zero normalising mass on the grid");

  auto signed_diff = [&](const vec_t& z) {
    const vec_t x = fit.unwhiten(z);
    const double p = model.domain_guard(x) ? std::exp(vhat - model.value(x)) / den : 0.0;
    double q = std::exp(-0.5 * (z.squaredNorm() + d * kLog2Pi));
    if (against == TvAgainst::skew_corrected) q *= 1.0 + eval_skew_whitened(*sc, z);
    return p - q;
  };

  if (d == 1) {
    return tv_1d_rootsplit([&](double z) { return signed_diff(vec_t::Constant(1, z)); }, grid);
  }

  // d = 2, 3: half L1 on the tensor rule
  double acc = 0.0;
  for_each_point(d, grid.nodes, grid.weights,
                 [&](const vec_t& z, double w) { acc += w * std::abs(signed_diff(z)); });
  return 0.5 * acc;
}

double true_halfspace_prob(const PosteriorModel& model, const LaplaceFit& fit, const vec_t& normal,
                           const QuadratureGrid& grid) {
  const index_t d = fit.dim();
  require_small_d(d);
  // a.(x - mode) = c.z with c = L^{-1} a; rotate so c lines up with axis 1
  vec_t c = fit.factor.triangularView<Eigen::Lower>().solve(normal);
  const double cn = c.norm();
  if (cn <= 0.0) throw ArgumentError("true_halfspace_prob: zero normal");
  c /= cn;
  mat_t Q = mat_t::Identity(d, d);
  if (d > 1) {
    Eigen::HouseholderQR<mat_t> qr(c);
    Q = qr.householderQ();
    // make the first column point along +c
    if (Q.col(0).dot(c) < 0.0) Q = -Q;
  }

  const double vhat = model.value(fit.mode);
  const index_t m = grid.nodes.size();

  // positive-axis nodes for coordinate 1: same rule mapped onto [0, h]
  vec_t pos_nodes = 0.5 * (grid.nodes.array() + grid.half_width);
  vec_t pos_weights = 0.5 * grid.weights;

  double den = 0.0, num = 0.0;
  std::vector<index_t> idx(static_cast<std::size_t>(d), 0);
  vec_t xi(d);
  auto run = [&](const vec_t& axis1_nodes, const vec_t& axis1_weights, double& acc) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double w = axis1_weights[idx[0]];
      xi[0] = axis1_nodes[idx[0]];
      for (index_t a = 1; a < d; ++a) {
        xi[a] = grid.nodes[idx[static_cast<std::size_t>(a)]];
        w *= grid.weights[idx[static_cast<std::size_t>(a)]];
      }
      const vec_t x = fit.unwhiten(Q * xi);
      if (model.domain_guard(x)) acc += w * std::exp(vhat - model.value(x));
      index_t a = 0;
      while (a < d) {
        if (++idx[static_cast<std::size_t>(a)] < m) break;
        idx[static_cast<std::size_t>(a)] = 0;
        ++a;
      }
      if (a == d) break;
    }
  };
  run(grid.nodes, grid.weights, den);
  run(pos_nodes, pos_weights, num);
  if (den <= 0.0) throw NumericalError("true_halfspace_prob: zero normalising mass");
  return num / den;
}

}  // namespace skewlap
