#include "skewlap/laplace.hpp"

#include <cmath>
#include <limits>

#include "skewlap/errors.hpp"
#include "skewlap/rng.hpp"

namespace skewlap {

mat_t cholesky_lower(const mat_t& A) {
  const index_t d = A.rows();
  mat_t L = mat_t::Zero(d, d);
  double smallest_pivot = std::numeric_limits<double>::infinity();
  for (index_t j = 0; j < d; ++j) {
    double pivot = A(j, j) - L.row(j).head(j).squaredNorm();
    smallest_pivot = std::min(smallest_pivot, pivot);
    if (!(pivot > 0.0)) {
      throw NotPositiveDefiniteError(
          "matrix not positive definite: smallest Cholesky pivot " + std::to_string(pivot) +
              " at index " + std::to_string(j),
          pivot);
    }
    L(j, j) = std::sqrt(pivot);
    for (index_t i = j + 1; i < d; ++i) {
      L(i, j) = (A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }
  return L;
}

vec_t LaplaceFit::whiten(const vec_t& x) const {
  return factor.transpose() * (x - mode);
}

vec_t LaplaceFit::unwhiten(const vec_t& z) const {
  return mode + factor.transpose().triangularView<Eigen::Upper>().solve(z);
}

double LaplaceFit::hv_norm(const vec_t& delta) const {
  return (factor.transpose() * delta).norm();
}

vec_t LaplaceFit::solve_hess(const vec_t& b) const {
  vec_t y = factor.triangularView<Eigen::Lower>().solve(b);
  return factor.transpose().triangularView<Eigen::Upper>().solve(y);
}

mat_t LaplaceFit::covariance() const {
  const index_t d = dim();
  mat_t inv_l = factor.triangularView<Eigen::Lower>().solve(mat_t::Identity(d, d));
  return inv_l.transpose() * inv_l;
}

namespace {

// A vanishing whitened gradient is not sufficient on its own: a potential
// that flattens along a ray (separated logistic data under a flat prior)
// satisfies any tolerance while the iterate escapes. Probe far along the
// travel direction; if V is still below the candidate value there, this is a
// descent ray, not a mode.
bool escaped_along_ray(const PosteriorModel& model, const vec_t& x0, const vec_t& x, double fx) {
  const vec_t drift = x - x0;
  const double dn = drift.norm();
  if (dn <= 1.0) return false;
  const vec_t probe = x + (100.0 * (1.0 + dn) / dn) * drift;
  if (!model.domain_guard(probe)) return false;
  const double fp = model.value(probe);
  return std::isfinite(fp) && fp <= fx;
}

}  // namespace

ModeResult find_mode(const PosteriorModel& model, const vec_t& x0, int max_iter,
                     double grad_tol) {
  const index_t d = model.dim();
  if (!model.domain_guard(x0)) throw ArgumentError("find_mode: x0 outside domain");
  const double tol = grad_tol > 0.0 ? grad_tol : 1e-10 * std::sqrt(static_cast<double>(d));
  const double armijo = 1e-4;
  const double eps = std::numeric_limits<double>::epsilon();

  ModeResult res;
  res.mode = x0;
  vec_t x = x0;
  double fx = model.value(x);
  vec_t best_x = x;
  double best_gn = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int it = 0; it < max_iter; ++it) {
    const vec_t g = model.gradient(x);
    const mat_t H = model.hessian(x);

    vec_t step;
    double gn = std::numeric_limits<double>::infinity();
    bool newton_ok = true;
    try {
      const mat_t L = cholesky_lower(H);
      const vec_t y = L.triangularView<Eigen::Lower>().solve(g);
      gn = y.norm();  // Newton decrement = |H^{-1/2} grad V|
      if (gn <= tol) {
        res.mode = x;
        res.iterations = it;
        if (escaped_along_ray(model, x0, x, fx)) {
          res.diverged = true;
        } else {
          res.converged = true;
        }
        return res;
      }
      step = -L.transpose().triangularView<Eigen::Upper>().solve(y);
    } catch (const NotPositiveDefiniteError&) {
      newton_ok = false;
    }
    if (!newton_ok) {
      ++res.gradient_fallbacks;
      step = -g;
      double sn = step.norm();
      if (sn > 1.0) step /= sn;  // unit gradient step keeps the search sane
    }

    if (newton_ok) {
      if (gn < best_gn) {
        best_gn = gn;
        best_x = x;
        stalled = 0;
      } else if (++stalled >= 5) {
        res.mode = best_x;  // cycling at the floating-point floor
        res.iterations = it + 1;
        res.converged =
            best_gn <= tol && !escaped_along_ray(model, x0, best_x, model.value(best_x));
        res.diverged = best_gn <= tol && !res.converged;
        return res;
      }
    }

    // Once the decrement is below the resolution of V in double precision,
    // Armijo comparisons are noise; take the full Newton step (domain guard
    // still enforced).
    const double quad_threshold = 30.0 * std::sqrt(eps * (1.0 + std::abs(fx)));
    const bool quad_phase = newton_ok && gn <= std::max(1e-6, quad_threshold);

    bool accepted = false;
    if (quad_phase) {
      double alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        vec_t trial = x + alpha * step;
        if (model.domain_guard(trial)) {
          x = trial;
          fx = model.value(x);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
    } else {
      const double slope = g.dot(step);
      double alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        vec_t trial = x + alpha * step;
        if (model.domain_guard(trial)) {
          const double ft = model.value(trial);
          if (ft <= fx + armijo * alpha * slope) {
            x = trial;
            fx = ft;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.mode = best_gn < std::numeric_limits<double>::infinity() ? best_x : x;
      res.converged =
          best_gn <= tol && !escaped_along_ray(model, x0, res.mode, model.value(res.mode));
      res.diverged = best_gn <= tol && !res.converged;
      return res;  // stalled line search
    }
    if (x.norm() > 1e6) {
      res.mode = x;
      res.diverged = true;
      return res;  // mode runs off, e.g. separated data under a flat prior
    }
  }

  // Final tolerance check at max_iter.
  res.mode = x;
  try {
    const mat_t L = cholesky_lower(model.hessian(x));
    const vec_t y = L.triangularView<Eigen::Lower>().solve(model.gradient(x));
    res.converged = y.norm() <= tol;
    if (!res.converged && best_gn <= tol) {
      res.mode = best_x;
      res.converged = true;
    }
    if (res.converged && escaped_along_ray(model, x0, res.mode, model.value(res.mode))) {
      res.converged = false;
      res.diverged = true;
    }
  } catch (const NotPositiveDefiniteError&) {
    res.converged = false;
  }
  return res;
}

LaplaceFit fit_laplace(const PosteriorModel& model, const vec_t& mode, double c0, double s0) {
  LaplaceFit fit;
  fit.mode = mode;
  fit.hess = model.hessian(mode);
  fit.factor = cholesky_lower(fit.hess);
  fit.log_det_hess = 2.0 * fit.factor.diagonal().array().log().sum();
  fit.model_n = model.n_scale();
  fit.c0 = c0;
  fit.s0 = s0;
  return fit;
}

WhitenedThird WhitenedThird::zero(index_t d) {
  WhitenedThird t;
  t.dim_ = d;
  t.low_rank_ = false;
  t.dense_.assign(static_cast<std::size_t>(d) * d * d, 0.0);
  return t;
}

WhitenedThird WhitenedThird::from_dense(index_t d, std::vector<double> entries) {
  WhitenedThird t;
  t.dim_ = d;
  t.low_rank_ = false;
  t.dense_ = std::move(entries);
  return t;
}

WhitenedThird WhitenedThird::from_low_rank(vec_t weights, mat_t vectors) {
  WhitenedThird t;
  t.dim_ = vectors.cols();
  t.low_rank_ = true;
  t.weights_ = std::move(weights);
  t.vectors_ = std::move(vectors);
  return t;
}

double WhitenedThird::contract(const vec_t& u, const vec_t& v, const vec_t& w) const {
  const index_t d = dim_;
  if (low_rank_) {
    const vec_t tu = vectors_ * u, tv = vectors_ * v, tw = vectors_ * w;
    return (weights_.array() * tu.array() * tv.array() * tw.array()).sum();
  }
  double acc = 0.0;
  for (index_t k = 0; k < d; ++k)
    for (index_t j = 0; j < d; ++j) {
      double ujwk = v[j] * w[k];
      const double* slice = dense_.data() + static_cast<std::size_t>(d) * (j + d * k);
      double inner = 0.0;
      for (index_t i = 0; i < d; ++i) inner += slice[i] * u[i];
      acc += inner * ujwk;
    }
  return acc;
}

double WhitenedThird::contract_cube(const vec_t& z) const { return contract(z, z, z); }

vec_t WhitenedThird::contract_eye() const {
  const index_t d = dim_;
  vec_t out = vec_t::Zero(d);
  if (low_rank_) {
    // sum_l a_l |B_l|^2 B_l
    const vec_t sq = vectors_.rowwise().squaredNorm();
    out = vectors_.transpose() * (weights_.array() * sq.array()).matrix();
    return out;
  }
  for (index_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (index_t j = 0; j < d; ++j) s += dense_[i + static_cast<std::size_t>(d) * (j + d * j)];
    out[i] = s;
  }
  return out;
}

double WhitenedThird::frobenius_sq() const {
  if (low_rank_) {
    // sum_{l,m} a_l a_m (B_l . B_m)^3 evaluated in row blocks
    const index_t n = vectors_.rows();
    const index_t block = 256;
    double acc = 0.0;
    for (index_t l0 = 0; l0 < n; l0 += block) {
      const index_t bl = std::min(block, n - l0);
      const mat_t G = vectors_.middleRows(l0, bl) * vectors_.transpose();
      for (index_t r = 0; r < bl; ++r) {
        double row = 0.0;
        for (index_t m = 0; m < n; ++m) {
          const double g = G(r, m);
          row += weights_[m] * g * g * g;
        }
        acc += weights_[l0 + r] * row;
      }
    }
    return acc;
  }
  double acc = 0.0;
  for (double t : dense_) acc += t * t;
  return acc;
}

vec_t WhitenedThird::contract_cube_rows(const mat_t& Z) const {
  const index_t m = Z.rows(), d = dim_;
  vec_t out(m);
  if (low_rank_) {
    const index_t block = 512;
    for (index_t r0 = 0; r0 < m; r0 += block) {
      const index_t br = std::min(block, m - r0);
      const mat_t P = Z.middleRows(r0, br) * vectors_.transpose();  // br x n
      out.segment(r0, br) = P.array().cube().matrix() * weights_;
    }
    return out;
  }
  // W = Z * T_(1) with T flattened d x d^2, then quadratic form per row.
  Eigen::Map<const mat_t> tmat(dense_.data(), d, d * d);
  const index_t block = 256;
  for (index_t r0 = 0; r0 < m; r0 += block) {
    const index_t br = std::min(block, m - r0);
    const mat_t W = Z.middleRows(r0, br) * tmat;  // br x d^2
    for (index_t r = 0; r < br; ++r) {
      double acc = 0.0;
      const vec_t zr = Z.row(r0 + r).transpose();
      for (index_t k = 0; k < d; ++k) {
        double inner = 0.0;
        for (index_t j = 0; j < d; ++j) inner += W(r, j + d * k) * zr[j];
        acc += inner * zr[k];
      }
      out[r0 + r] = acc;
    }
  }
  return out;
}

WhitenedThird WhitenedThird::densified() const {
  if (!low_rank_) return *this;
  const index_t d = dim_, n = vectors_.rows();
  std::vector<double> dense(static_cast<std::size_t>(d) * d * d, 0.0);
  // accumulate a_l B_l^(x)3 on the i <= j <= k wedge, then mirror
  for (index_t l = 0; l < n; ++l) {
    const double a = weights_[l];
    const auto b = vectors_.row(l);
    for (index_t k = 0; k < d; ++k) {
      const double bk = a * b[k];
      for (index_t j = 0; j <= k; ++j) {
        const double bjk = bk * b[j];
        double* col = dense.data() + static_cast<std::size_t>(d) * (j + d * k);
        for (index_t i = 0; i <= j; ++i) col[i] += bjk * b[i];
      }
    }
  }
  // mirror wedge onto all six index orders
  for (index_t k = 0; k < d; ++k)
    for (index_t j = 0; j <= k; ++j)
      for (index_t i = 0; i <= j; ++i) {
        const double t = dense[i + static_cast<std::size_t>(d) * (j + d * k)];
        const index_t idx[3] = {i, j, k};
        index_t perm[3];
        for (int a0 = 0; a0 < 3; ++a0)
          for (int a1 = 0; a1 < 3; ++a1) {
            if (a1 == a0) continue;
            const int a2 = 3 - a0 - a1;
            perm[0] = idx[a0];
            perm[1] = idx[a1];
            perm[2] = idx[a2];
            dense[perm[0] + static_cast<std::size_t>(d) * (perm[1] + d * perm[2])] = t;
          }
      }
  return from_dense(d, std::move(dense));
}

WhitenedThird whitened_third(const PosteriorModel& model, const LaplaceFit& fit, ThirdMode mode,
                             index_t dense_cap) {
  const index_t d = fit.dim();
  if (mode == ThirdMode::low_rank) {
    if (!model.has_rank1_third())
      throw UnsupportedRepresentationError(
          "low_rank whitened third requested for a model without rank-1 structure");
    vec_t w;
    mat_t X;
    model.rank1_third(fit.mode, w, X);
    // B_l = L^{-1} X_l realises <T,u(x)v(x)w> = sum a_l (B_l.u)(B_l.v)(B_l.w)
    mat_t B = fit.factor.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
    return WhitenedThird::from_low_rank(std::move(w), std::move(B));
  }
  if (d > dense_cap)
    throw ArgumentError("dense whitened third refused: d = " + std::to_string(d) +
                        " exceeds cap " + std::to_string(dense_cap));
  if (model.has_rank1_third()) {
    // same tensor, built in O(n d^3 / 6) instead of d^3 contraction calls
    vec_t w;
    mat_t X;
    model.rank1_third(fit.mode, w, X);
    mat_t B = fit.factor.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
    return WhitenedThird::from_low_rank(std::move(w), std::move(B)).densified();
  }
  // columns of L^{-T}
  mat_t cols = fit.factor.transpose().triangularView<Eigen::Upper>().solve(mat_t::Identity(d, d));
  std::vector<double> dense(static_cast<std::size_t>(d) * d * d, 0.0);
  for (index_t k = 0; k < d; ++k)
    for (index_t j = 0; j <= k; ++j)
      for (index_t i = 0; i <= j; ++i) {
        const double t = model.third_dir(fit.mode, cols.col(i), cols.col(j), cols.col(k));
        const index_t idx[3] = {i, j, k};
        index_t perm[3];
        for (int a0 = 0; a0 < 3; ++a0)
          for (int a1 = 0; a1 < 3; ++a1) {
            if (a1 == a0) continue;
            const int a2 = 3 - a0 - a1;
            perm[0] = idx[a0];
            perm[1] = idx[a1];
            perm[2] = idx[a2];
            dense[perm[0] + static_cast<std::size_t>(d) * (perm[1] + d * perm[2])] = t;
          }
      }
  return WhitenedThird::from_dense(d, std::move(dense));
}

mat_t sample_gaussian(const LaplaceFit& fit, index_t count, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("sample_gaussian: count must be >= 1");
  const index_t d = fit.dim();
  Rng rng(seed);
  mat_t out(count, d);
  vec_t z(d);
  for (index_t r = 0; r < count; ++r) {
    for (index_t i = 0; i < d; ++i) z[i] = rng.next_normal();
    out.row(r) = fit.unwhiten(z).transpose();
  }
  return out;
}

}  // namespace skewlap
