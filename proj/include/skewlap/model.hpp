#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skewlap/errors.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// Evaluation contract for a potential V = n*v on an open domain Theta.
// All evaluations are pure and safe for concurrent callers; implementations
// are immutable after construction.
//
// Directional derivative contractions are exposed instead of dense tensors so
// that GLM-structured models stay O(n*d) per contraction. The public
// third_dir/fourth_dir/fifth_dir entry points order their direction arguments
// canonically before dispatching, which makes the contractions exactly
// invariant under permutation of the directions.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;

  virtual index_t dim() const = 0;
  virtual double n_scale() const = 0;

  virtual double value(const vec_t& x) const = 0;
  virtual vec_t gradient(const vec_t& x) const = 0;
  virtual mat_t hessian(const vec_t& x) const = 0;

  // <grad^3 V(x), u (x) v (x) w>
  double third_dir(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w) const;

  // <grad^3 V(x), A>_i = sum_jk grad^3 V(x)_ijk A_jk, A symmetric.
  virtual vec_t third_mat(const vec_t& x, const mat_t& A) const = 0;

  virtual bool has_fourth() const { return false; }
  virtual bool has_fifth() const { return false; }
  double fourth_dir(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w,
                    const vec_t& s) const;
  double fifth_dir(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w, const vec_t& s,
                   const vec_t& t) const;

  // True iff x lies in Theta. Optimizers backtrack rather than evaluate
  // outside the guard.
  virtual bool domain_guard(const vec_t&) const { return true; }

  // Rank-one third-derivative structure grad^3 V(x) = sum_l a_l X_l^(x)3,
  // advertised by GLM-type models; weights() = a_l(x), vectors() rows = X_l.
  virtual bool has_rank1_third() const { return false; }
  virtual void rank1_third(const vec_t& /*x*/, vec_t& /*weights*/, mat_t& /*vectors*/) const {
    throw UnsupportedRepresentationError("model does not expose rank-1 third derivative");
  }

 protected:
  virtual double third_dir_impl(const vec_t& x, const vec_t& u, const vec_t& v,
                                const vec_t& w) const = 0;
  virtual double fourth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                                 const vec_t&) const {
    throw UnsupportedRepresentationError("model does not expose fourth derivative");
  }
  virtual double fifth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                                const vec_t&, const vec_t&) const {
    throw UnsupportedRepresentationError("model does not expose fifth derivative");
  }
};

struct DerivativeCheckReport {
  double max_rel_err_gradient = 0.0;
  double max_rel_err_hessian = 0.0;
  double max_rel_err_third = 0.0;
  bool pass = false;
  // Named failures (domain violations on the stencil and the like).
  std::vector<std::string> failures;
};

// Central-difference verification of gradient/hessian/third_dir against
// value/gradient/hessian. Default step is 1e-5 * (1 + |x|_inf) when step <= 0.
DerivativeCheckReport check_derivatives(const PosteriorModel& model, const vec_t& x,
                                        double step = 0.0, double tol = 1e-4,
                                        std::uint64_t probe_seed = 7);

}  // namespace skewlap
