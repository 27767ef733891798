#include "skewlap/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "skewlap/rng.hpp"

namespace skewlap {

namespace {

// Lexicographic order on coefficients; ties by address are harmless since the
// vectors then hold identical data.
bool lex_less(const vec_t& a, const vec_t& b) {
  for (index_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

template <std::size_t K>
std::array<const vec_t*, K> sorted_dirs(std::array<const vec_t*, K> dirs) {
  std::sort(dirs.begin(), dirs.end(),
            [](const vec_t* a, const vec_t* b) { return lex_less(*a, *b); });
  return dirs;
}

}  // namespace

double PosteriorModel::third_dir(const vec_t& x, const vec_t& u, const vec_t& v,
                                 const vec_t& w) const {
  auto d = sorted_dirs<3>({&u, &v, &w});
  return third_dir_impl(x, *d[0], *d[1], *d[2]);
}

double PosteriorModel::fourth_dir(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w,
                                  const vec_t& s) const {
  auto d = sorted_dirs<4>({&u, &v, &w, &s});
  return fourth_dir_impl(x, *d[0], *d[1], *d[2], *d[3]);
}

double PosteriorModel::fifth_dir(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w,
                                 const vec_t& s, const vec_t& t) const {
  auto d = sorted_dirs<5>({&u, &v, &w, &s, &t});
  return fifth_dir_impl(x, *d[0], *d[1], *d[2], *d[3], *d[4]);
}

DerivativeCheckReport check_derivatives(const PosteriorModel& model, const vec_t& x, double step,
                                        double tol, std::uint64_t probe_seed) {
  DerivativeCheckReport rep;
  const index_t d = model.dim();
  const double h = step > 0.0 ? step : 1e-5 * (1.0 + x.lpNorm<Eigen::Infinity>());

  if (!model.domain_guard(x)) {
    rep.failures.push_back("base point outside domain");
    return rep;
  }

  auto guard_ok = [&](const vec_t& p, const std::string& label) {
    if (model.domain_guard(p)) return true;
    rep.failures.push_back("domain violation on stencil: " + label);
    return false;
  };

  // Gradient against central differences of the value.
  {
    const vec_t g = model.gradient(x);
    const double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
    for (index_t i = 0; i < d; ++i) {
      vec_t xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      if (!guard_ok(xp, "gradient +e" + std::to_string(i)) ||
          !guard_ok(xm, "gradient -e" + std::to_string(i)))
        continue;
      const double fd = (model.value(xp) - model.value(xm)) / (2.0 * h);
      rep.max_rel_err_gradient = std::max(rep.max_rel_err_gradient, std::abs(fd - g[i]) / scale);
    }
  }

  // Hessian columns against central differences of the gradient.
  {
    const mat_t H = model.hessian(x);
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    for (index_t i = 0; i < d; ++i) {
      vec_t xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      if (!guard_ok(xp, "hessian +e" + std::to_string(i)) ||
          !guard_ok(xm, "hessian -e" + std::to_string(i)))
        continue;
      const vec_t fd = (model.gradient(xp) - model.gradient(xm)) / (2.0 * h);
      rep.max_rel_err_hessian =
          std::max(rep.max_rel_err_hessian, (fd - H.col(i)).lpNorm<Eigen::Infinity>() / scale);
    }
  }

  // third_dir against central differences of the Hessian, probed on random
  // directions so the check stays cheap in higher dimension.
  {
    Rng rng(probe_seed);
    const int probes = 4;
    for (int p = 0; p < probes; ++p) {
      vec_t u = rng.normal_vec(d), v = rng.normal_vec(d), w = rng.normal_vec(d);
      u.normalize();
      v.normalize();
      w.normalize();
      vec_t xp = x + h * w, xm = x - h * w;
      if (!guard_ok(xp, "third +h*w") || !guard_ok(xm, "third -h*w")) continue;
      const double fd = (u.dot(model.hessian(xp) * v) - u.dot(model.hessian(xm) * v)) / (2.0 * h);
      const double an = model.third_dir(x, u, v, w);
      const double scale = std::max({1.0, std::abs(an), std::abs(fd)});
      rep.max_rel_err_third = std::max(rep.max_rel_err_third, std::abs(fd - an) / scale);
    }
  }

  rep.pass = rep.failures.empty() && rep.max_rel_err_gradient <= tol &&
             rep.max_rel_err_hessian <= tol && rep.max_rel_err_third <= tol;
  return rep;
}

}  // namespace skewlap
