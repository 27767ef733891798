#include "skewlap/multinomial.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "skewlap/errors.hpp"

namespace skewlap {

namespace {

// Lift marginal directions to the d+1 simplex tangent: u'_0 = -sum u_j.
vec_t lift(const vec_t& u) {
  vec_t up(u.size() + 1);
  up[0] = -u.sum();
  up.tail(u.size()) = u;
  return up;
}

class MultinomialModel final : public PosteriorModel {
 public:
  MultinomialModel(vec_t freqs, double n) : p_(std::move(freqs)), n_(n), d_(p_.size() - 1) {}

  index_t dim() const override { return d_; }
  double n_scale() const override { return n_; }

  bool domain_guard(const vec_t& x) const override {
    if ((x.array() <= 0.0).any()) return false;
    return x.sum() < 1.0;
  }

  double value(const vec_t& x) const override {
    const double theta0 = 1.0 - x.sum();
    double v = -p_[0] * std::log(theta0);
    for (index_t i = 0; i < d_; ++i) v -= p_[i + 1] * std::log(x[i]);
    return n_ * v;
  }

  vec_t gradient(const vec_t& x) const override {
    const double theta0 = 1.0 - x.sum();
    const double g0 = p_[0] / theta0;
    vec_t g(d_);
    for (index_t i = 0; i < d_; ++i) g[i] = n_ * (g0 - p_[i + 1] / x[i]);
    return g;
  }

  mat_t hessian(const vec_t& x) const override {
    const double theta0 = 1.0 - x.sum();
    const double h0 = p_[0] / (theta0 * theta0);
    mat_t H = mat_t::Constant(d_, d_, n_ * h0);
    for (index_t i = 0; i < d_; ++i) H(i, i) += n_ * p_[i + 1] / (x[i] * x[i]);
    return H;
  }

  vec_t third_mat(const vec_t& x, const mat_t& A) const override {
    // c_j = -2 p_j (M A M^T)_jj / theta_j^3; result in marginal coords is
    // n (c_i - c_0) with (M A M^T)_00 = 1^T A 1 and diagonal A_ii otherwise.
    const double theta0 = 1.0 - x.sum();
    const double c0 = -2.0 * p_[0] * A.sum() / (theta0 * theta0 * theta0);
    vec_t out(d_);
    for (index_t i = 0; i < d_; ++i) {
      const double ci = -2.0 * p_[i + 1] * A(i, i) / (x[i] * x[i] * x[i]);
      out[i] = n_ * (ci - c0);
    }
    return out;
  }

  bool has_fourth() const override { return true; }
  bool has_fifth() const override { return true; }

 protected:
  double third_dir_impl(const vec_t& x, const vec_t& u, const vec_t& v,
                        const vec_t& w) const override {
    const vec_t up = lift(u), vp = lift(v), wp = lift(w);
    const vec_t theta = lift_theta(x);
    double acc = 0.0;
    for (index_t j = 0; j <= d_; ++j) {
      const double t = theta[j];
      acc += p_[j] * up[j] * vp[j] * wp[j] / (t * t * t);
    }
    return -2.0 * n_ * acc;
  }

  double fourth_dir_impl(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w,
                         const vec_t& s) const override {
    const vec_t up = lift(u), vp = lift(v), wp = lift(w), sp = lift(s);
    const vec_t theta = lift_theta(x);
    double acc = 0.0;
    for (index_t j = 0; j <= d_; ++j) {
      const double t = theta[j];
      acc += p_[j] * up[j] * vp[j] * wp[j] * sp[j] / (t * t * t * t);
    }
    return 6.0 * n_ * acc;
  }

  double fifth_dir_impl(const vec_t& x, const vec_t& u, const vec_t& v, const vec_t& w,
                        const vec_t& s, const vec_t& t) const override {
    const vec_t up = lift(u), vp = lift(v), wp = lift(w), sp = lift(s), tp = lift(t);
    const vec_t theta = lift_theta(x);
    double acc = 0.0;
    for (index_t j = 0; j <= d_; ++j) {
      const double th = theta[j];
      acc += p_[j] * up[j] * vp[j] * wp[j] * sp[j] * tp[j] / (th * th * th * th * th);
    }
    return -24.0 * n_ * acc;
  }

 private:
  vec_t lift_theta(const vec_t& x) const {
    vec_t theta(d_ + 1);
    theta[0] = 1.0 - x.sum();
    theta.tail(d_) = x;
    return theta;
  }

  vec_t p_;
  double n_;
  index_t d_;
};

}  // namespace

MultinomialPosterior make_multinomial(const Eigen::VectorXi& counts) {
  if (counts.size() < 2) throw ArgumentError("multinomial: need at least two categories");
  if ((counts.array() <= 0).any())
    throw ArgumentError("multinomial: all counts must be positive");
  MultinomialPosterior mp;
  mp.counts = counts;
  mp.n = counts.cast<long long>().sum();
  mp.freqs = counts.cast<double>() / static_cast<double>(mp.n);
  mp.p_min = mp.freqs.minCoeff();
  mp.model = std::make_shared<MultinomialModel>(mp.freqs, static_cast<double>(mp.n));
  return mp;
}

Eigen::VectorXi parse_counts(const std::string& text) {
  std::vector<int> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    vals.push_back(std::stoi(tok));
  }
  if (vals.empty()) throw ArgumentError("counts: empty");
  Eigen::VectorXi out(static_cast<index_t>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out[static_cast<index_t>(i)] = vals[i];
  return out;
}

Eigen::VectorXi read_counts_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open counts file: " + path);
  std::vector<int> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // allow an optional non-numeric header
    try {
      vals.push_back(std::stoi(line));
    } catch (const std::exception&) {
      if (!vals.empty()) throw ArgumentError("counts csv: bad line '" + line + "'");
    }
  }
  if (vals.empty()) throw ArgumentError("counts csv: no values in " + path);
  Eigen::VectorXi out(static_cast<index_t>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out[static_cast<index_t>(i)] = vals[i];
  return out;
}

double tv_uniform(const vec_t& freqs) {
  const double u = 1.0 / static_cast<double>(freqs.size());
  return 0.5 * (freqs.array() - u).abs().sum();
}

MultinomialExact exact_quantities(const MultinomialPosterior& mp) {
  const index_t d = mp.d();
  const double n = static_cast<double>(mp.n);
  const vec_t& p = mp.freqs;

  MultinomialExact ex;
  ex.mode = p;
  ex.mean = (mp.counts.cast<double>().array() + 1.0) / (n + static_cast<double>(d) + 1.0);
  ex.delta_mode = (vec_t::Constant(d + 1, 1.0 / n) - (static_cast<double>(d + 1) / n) * p);
  const double shrink = 1.0 + static_cast<double>(d + 1) / n;
  ex.identity_residual = (ex.mean - ex.mode) - ex.delta_mode / shrink;

  ex.chi2_unif = p.cwiseInverse().sum() / std::pow(static_cast<double>(d + 1), 2) - 1.0;
  const double pmin = mp.p_min;
  ex.eps3_exact = 2.0 * (1.0 - 2.0 * pmin) / std::sqrt(1.0 - pmin) * static_cast<double>(d) /
                  std::sqrt(n * pmin);
  const double dd = static_cast<double>(d);
  ex.eps_bar3_exact = std::sqrt((5.0 / 3.0) * ex.chi2_unif * (dd + 1.0) * (dd + 1.0) / n +
                                2.0 * (dd * dd - dd) / (3.0 * n));
  ex.skew_norm = std::sqrt(std::max(0.0, ex.chi2_unif)) * (dd + 1.0) / std::sqrt(n);
  ex.remainder_norm =
      std::sqrt(std::max(0.0, ex.chi2_unif)) * (dd + 1.0) * (dd + 1.0) / ((n + dd + 1.0) * std::sqrt(n));
  return ex;
}

double multinomial_ck0_exact(const MultinomialPosterior& mp, int k) {
  if (k < 3 || k > 5) throw ArgumentError("multinomial_ck0_exact: k must be 3, 4 or 5");
  const double P = mp.p_min;
  double fact = 1.0;
  for (int i = 2; i < k; ++i) fact *= i;  // (k-1)!
  const double num = std::pow(1.0 - P, k - 1) - std::pow(P, k - 1);
  return fact * num / std::pow(P * (1.0 - P), 0.5 * k - 1.0);
}

std::optional<double> tv_lower_bound(const MultinomialPosterior& mp) {
  const double n = static_cast<double>(mp.n);
  const double d = static_cast<double>(mp.d());
  const double tvu = tv_uniform(mp.freqs);
  if (mp.p_min < 6.0 / std::sqrt(n + d)) return std::nullopt;
  if (tvu < 6.0 / (d + 1.0)) return std::nullopt;
  return tvu * d / (9.0 * std::sqrt(n));
}

}  // namespace skewlap
