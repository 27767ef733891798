#pragma once

#include "skewlap/model.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// V(x) = (1/2)(x - m)^T H (x - m); Gaussian target, zero skew.
class QuadraticModel final : public PosteriorModel {
 public:
  QuadraticModel(vec_t m, mat_t H, double n = 1.0)
      : m_(std::move(m)), H_(std::move(H)), n_(n) {}

  index_t dim() const override { return m_.size(); }
  double n_scale() const override { return n_; }
  double value(const vec_t& x) const override {
    const vec_t r = x - m_;
    return 0.5 * r.dot(H_ * r);
  }
  vec_t gradient(const vec_t& x) const override { return H_ * (x - m_); }
  mat_t hessian(const vec_t&) const override { return H_; }
  vec_t third_mat(const vec_t&, const mat_t&) const override { return vec_t::Zero(dim()); }
  bool has_fourth() const override { return true; }
  bool has_fifth() const override { return true; }

 protected:
  double third_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&) const override {
    return 0.0;
  }
  double fourth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                         const vec_t&) const override {
    return 0.0;
  }
  double fifth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                        const vec_t&) const override {
    return 0.0;
  }

 private:
  vec_t m_;
  mat_t H_;
  double n_;
};

// V(x) = n sum_j (x_j^2 / 2 + a_j x_j^3 / 6): separable cubic perturbation
// with the mode exactly at 0, H_V = n I, and whitened tensor entries
// T_jjj = a_j / sqrt(n).
class CubicModel final : public PosteriorModel {
 public:
  CubicModel(vec_t coeffs, double n) : a_(std::move(coeffs)), n_(n) {}

  index_t dim() const override { return a_.size(); }
  double n_scale() const override { return n_; }

  double value(const vec_t& x) const override {
    double acc = 0.0;
    for (index_t j = 0; j < a_.size(); ++j)
      acc += 0.5 * x[j] * x[j] + a_[j] * x[j] * x[j] * x[j] / 6.0;
    return n_ * acc;
  }
  vec_t gradient(const vec_t& x) const override {
    return n_ * (x.array() + 0.5 * a_.array() * x.array().square()).matrix();
  }
  mat_t hessian(const vec_t& x) const override {
    return (n_ * (1.0 + (a_.array() * x.array()))).matrix().asDiagonal();
  }
  vec_t third_mat(const vec_t&, const mat_t& A) const override {
    return n_ * (a_.array() * A.diagonal().array()).matrix();
  }
  bool has_fourth() const override { return true; }
  bool has_fifth() const override { return true; }

 protected:
  double third_dir_impl(const vec_t&, const vec_t& u, const vec_t& v,
                        const vec_t& w) const override {
    return n_ * (a_.array() * u.array() * v.array() * w.array()).sum();
  }
  double fourth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                         const vec_t&) const override {
    return 0.0;
  }
  double fifth_dir_impl(const vec_t&, const vec_t&, const vec_t&, const vec_t&, const vec_t&,
                        const vec_t&) const override {
    return 0.0;
  }

 private:
  vec_t a_;
  double n_;
};

}  // namespace skewlap
