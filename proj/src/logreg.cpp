#include "skewlap/logreg.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "skewlap/errors.hpp"
#include "skewlap/quadrules.hpp"
#include "skewlap/rng.hpp"

namespace skewlap {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double psi(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double psi2(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s);
}

double psi3(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s) * (1.0 - 2.0 * s);
}

double psi4(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
}

double psi5(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s) * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s);
}

namespace {

double psik(int k, double t) {
  switch (k) {
    case 0: return psi(t);
    case 1: return sigmoid(t);
    case 2: return psi2(t);
    case 3: return psi3(t);
    case 4: return psi4(t);
    case 5: return psi5(t);
    default: throw ArgumentError("psik: bad order");
  }
}

class LogRegModel final : public PosteriorModel {
 public:
  LogRegModel(mat_t X, vec_t y, mat_t P)
      : X_(std::move(X)), y_(std::move(y)), P_(std::move(P)), d_(X_.cols()), n_(X_.rows()) {}

  index_t dim() const override { return d_; }
  double n_scale() const override { return static_cast<double>(n_); }

  double value(const vec_t& b) const override {
    const vec_t t = X_ * b;
    double acc = 0.0;
    for (index_t i = 0; i < n_; ++i) acc += psi(t[i]) - y_[i] * t[i];
    return acc + 0.5 * b.dot(P_ * b);
  }

  vec_t gradient(const vec_t& b) const override {
    const vec_t t = X_ * b;
    vec_t r(n_);
    for (index_t i = 0; i < n_; ++i) r[i] = sigmoid(t[i]) - y_[i];
    return X_.transpose() * r + P_ * b;
  }

  mat_t hessian(const vec_t& b) const override {
    const vec_t t = X_ * b;
    vec_t w(n_);
    for (index_t i = 0; i < n_; ++i) w[i] = psi2(t[i]);
    return X_.transpose() * w.asDiagonal() * X_ + P_;
  }

  vec_t third_mat(const vec_t& b, const mat_t& A) const override {
    const vec_t t = X_ * b;
    const vec_t s = ((X_ * A).cwiseProduct(X_)).rowwise().sum();  // X_i . A X_i
    vec_t w(n_);
    for (index_t i = 0; i < n_; ++i) w[i] = psi3(t[i]) * s[i];
    return X_.transpose() * w;
  }

  bool has_fourth() const override { return true; }
  bool has_fifth() const override { return true; }

  bool has_rank1_third() const override { return true; }
  void rank1_third(const vec_t& b, vec_t& weights, mat_t& vectors) const override {
    const vec_t t = X_ * b;
    weights.resize(n_);
    for (index_t i = 0; i < n_; ++i) weights[i] = psi3(t[i]);
    vectors = X_;
  }

 protected:
  double third_dir_impl(const vec_t& b, const vec_t& u, const vec_t& v,
                        const vec_t& w) const override {
    const vec_t t = X_ * b, tu = X_ * u, tv = X_ * v, tw = X_ * w;
    double acc = 0.0;
    for (index_t i = 0; i < n_; ++i) acc += psi3(t[i]) * tu[i] * tv[i] * tw[i];
    return acc;
  }

  double fourth_dir_impl(const vec_t& b, const vec_t& u, const vec_t& v, const vec_t& w,
                         const vec_t& s) const override {
    const vec_t t = X_ * b, tu = X_ * u, tv = X_ * v, tw = X_ * w, ts = X_ * s;
    double acc = 0.0;
    for (index_t i = 0; i < n_; ++i) acc += psi4(t[i]) * tu[i] * tv[i] * tw[i] * ts[i];
    return acc;
  }

  double fifth_dir_impl(const vec_t& b, const vec_t& u, const vec_t& v, const vec_t& w,
                        const vec_t& s, const vec_t& r) const override {
    const vec_t t = X_ * b, tu = X_ * u, tv = X_ * v, tw = X_ * w, ts = X_ * s, tr = X_ * r;
    double acc = 0.0;
    for (index_t i = 0; i < n_; ++i) acc += psi5(t[i]) * tu[i] * tv[i] * tw[i] * ts[i] * tr[i];
    return acc;
  }

 private:
  mat_t X_;
  vec_t y_;
  mat_t P_;
  index_t d_, n_;
};

}  // namespace

LogRegDataset generate_data(index_t n, index_t d, const vec_t& beta, const mat_t& M,
                            std::uint64_t seed) {
  if (n < 1 || d < 1) throw ArgumentError("generate_data: n and d must be >= 1");
  if (beta.size() != d || M.rows() != d || M.cols() != d)
    throw ArgumentError("generate_data: inconsistent dimensions");
  const mat_t Lm = cholesky_lower(M);

  LogRegDataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  data.design_cov = M;
  data.truth = beta;

  Rng rng(seed);
  vec_t z(d);
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = 0; j < d; ++j) z[j] = rng.next_normal();
    const vec_t x = Lm * z;
    data.features.row(i) = x.transpose();
    const double u = rng.next_double();
    data.labels[i] = u < sigmoid(beta.dot(x)) ? 1.0 : 0.0;
  }
  return data;
}

void write_logreg_csv(const std::string& path, const LogRegDataset& data) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path);
  const index_t d = data.features.cols();
  out << "y";
  for (index_t j = 0; j < d; ++j) out << ",x" << (j + 1);
  out << "\n";
  out.precision(17);
  for (index_t i = 0; i < data.features.rows(); ++i) {
    out << static_cast<int>(data.labels[i]);
    for (index_t j = 0; j < d; ++j) out << "," << data.features(i, j);
    out << "\n";
  }
}

LogRegDataset read_logreg_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("empty csv: " + path);
  std::stringstream hs(line);
  std::string col;
  std::vector<std::string> header;
  while (std::getline(hs, col, ',')) header.push_back(col);
  if (header.empty() || header[0] != "y")
    throw ArgumentError("logreg csv must start with a 'y' column: " + path);
  const index_t d = static_cast<index_t>(header.size()) - 1;
  if (d < 1) throw ArgumentError("logreg csv has no feature columns: " + path);

  std::vector<double> ys;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    int c = 0;
    while (std::getline(ls, tok, ',')) {
      const double v = std::stod(tok);
      if (c == 0)
        ys.push_back(v);
      else
        xs.push_back(v);
      ++c;
    }
    if (c != static_cast<int>(d) + 1)
      throw ArgumentError("logreg csv row has wrong arity: " + line);
  }
  const index_t n = static_cast<index_t>(ys.size());
  if (n < 1) throw ArgumentError("logreg csv has no rows: " + path);

  LogRegDataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (index_t i = 0; i < n; ++i) {
    const double y = ys[static_cast<std::size_t>(i)];
    if (y != 0.0 && y != 1.0) throw ArgumentError("labels must be 0/1");
    data.labels[i] = y;
    for (index_t j = 0; j < d; ++j)
      data.features(i, j) = xs[static_cast<std::size_t>(i * d + j)];
  }
  data.design_cov = mat_t::Identity(d, d);
  return data;
}

LogRegPosterior build_posterior(LogRegDataset data, const mat_t& prior_precision) {
  const index_t d = data.features.cols();
  if (prior_precision.rows() != d || prior_precision.cols() != d)
    throw ArgumentError("build_posterior: prior precision has wrong shape");
  LogRegPosterior post;
  post.model = std::make_shared<LogRegModel>(data.features, data.labels, prior_precision);
  post.prior_precision = prior_precision;
  post.data = std::move(data);
  return post;
}

LogRegPosterior build_posterior(LogRegDataset data, double kappa) {
  const index_t d = data.features.cols();
  return build_posterior(std::move(data), mat_t(kappa * mat_t::Identity(d, d)));
}

FastSkew fast_skew(const LogRegPosterior& posterior, const LaplaceFit& fit,
                   bool compute_eps_bar3) {
  const mat_t& X = posterior.data.features;
  const index_t n = X.rows();
  const vec_t that = X * fit.mode;
  vec_t a(n);
  for (index_t i = 0; i < n; ++i) a[i] = psi3(that[i]);

  // U = L^{-1} X^T, so U_l . U_m = X_l . H^{-1} X_m
  const mat_t U = fit.factor.triangularView<Eigen::Lower>().solve(mat_t(X.transpose()));
  const vec_t q = U.colwise().squaredNorm().transpose();

  FastSkew out;
  out.delta_mode = -0.5 * fit.factor.transpose().triangularView<Eigen::Upper>().solve(
                              mat_t(U * (a.array() * q.array()).matrix()));

  out.eps_bar3 = std::numeric_limits<double>::quiet_NaN();
  if (compute_eps_bar3) {
    // pairwise eps_bar3^2 in column blocks
    double acc = 0.0;
    const index_t block = 256;
    for (index_t l0 = 0; l0 < n; l0 += block) {
      const index_t bl = std::min(block, n - l0);
      const mat_t G = U.middleCols(l0, bl).transpose() * U;  // bl x n
      for (index_t r = 0; r < bl; ++r) {
        double row = 0.0;
        const double ql = q[l0 + r];
        for (index_t m = 0; m < n; ++m) {
          const double g = G(r, m);
          row += a[m] * (g * g * g / 6.0 + 0.25 * ql * q[m] * g);
        }
        acc += a[l0 + r] * row;
      }
    }
    out.eps_bar3 = std::sqrt(std::max(0.0, acc));
  }

  const vec_t mode = fit.mode;
  const mat_t Xc = X;
  const vec_t ac = a;
  out.skew_closure = [mode, Xc, ac](const vec_t& b) {
    const vec_t t = Xc * (b - mode);
    return -(ac.array() * t.array().cube()).sum() / 6.0;
  };
  return out;
}

double PopulationLogistic::a(int k, int p) const {
  double acc = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (index_t i = 0; i < gh_nodes_.size(); ++i) {
    const double z = sqrt2 * gh_nodes_[i];
    acc += gh_weights_[i] * psik(k, z) * std::pow(z, p);
  }
  return acc / std::sqrt(3.14159265358979323846264338327950288);
}

namespace {

// Potential v(x) = E[psi(Z.x)] - a_{1,1} x_1 evaluated through 1-D reduction:
// Z.x ~ |x| Z_1, and directions decompose along u = x/|x| and its complement.
class PopulationModel final : public PosteriorModel {
 public:
  PopulationModel(index_t d, double n, vec_t nodes, vec_t weights)
      : d_(d), n_(n), nodes_(std::move(nodes)), weights_(std::move(weights)) {
    a11_ = moment(1, 1, 1.0);
  }

  index_t dim() const override { return d_; }
  double n_scale() const override { return n_; }

  double value(const vec_t& x) const override {
    return n_ * (moment(0, 0, x.norm()) - a11_ * x[0]);
  }

  vec_t gradient(const vec_t& x) const override {
    const double r = x.norm();
    vec_t g = -n_ * a11_ * vec_t::Unit(d_, 0);
    if (r > tiny_) g += (n_ * moment(1, 1, r) / r) * x;
    return g;
  }

  mat_t hessian(const vec_t& x) const override {
    const double r = x.norm();
    if (r <= tiny_) return n_ * moment(2, 0, 0.0) * mat_t::Identity(d_, d_);
    const vec_t u = x / r;
    const double alpha = moment(2, 2, r), beta = moment(2, 0, r);
    return n_ * (beta * mat_t::Identity(d_, d_) + (alpha - beta) * (u * u.transpose()));
  }

  vec_t third_mat(const vec_t& x, const mat_t& A) const override {
    const double r = x.norm();
    const vec_t u = r > tiny_ ? vec_t(x / r) : vec_t(vec_t::Unit(d_, 0));
    const double m33 = moment(3, 3, r), m31 = moment(3, 1, r);
    Eigen::SelfAdjointEigenSolver<mat_t> es(A);
    vec_t out = vec_t::Zero(d_);
    for (index_t m = 0; m < d_; ++m) {
      const double lam = es.eigenvalues()[m];
      const vec_t w = es.eigenvectors().col(m);
      const double bu = u.dot(w);
      const double wperp = w.squaredNorm() - bu * bu;
      out += lam * (m33 * bu * bu * u + m31 * (wperp * u + 2.0 * bu * (w - bu * u)));
    }
    return n_ * out;
  }

  bool has_fourth() const override { return true; }

 protected:
  double third_dir_impl(const vec_t& x, const vec_t& a, const vec_t& b,
                        const vec_t& c) const override {
    const double r = x.norm();
    const vec_t u = r > tiny_ ? vec_t(x / r) : vec_t(vec_t::Unit(d_, 0));
    const double au = u.dot(a), bu = u.dot(b), cu = u.dot(c);
    const double ab = a.dot(b) - au * bu;
    const double ac = a.dot(c) - au * cu;
    const double bc = b.dot(c) - bu * cu;
    const double m33 = moment(3, 3, r), m31 = moment(3, 1, r);
    return n_ * (m33 * au * bu * cu + m31 * (au * bc + bu * ac + cu * ab));
  }

  double fourth_dir_impl(const vec_t& x, const vec_t& a, const vec_t& b, const vec_t& c,
                         const vec_t& e) const override {
    const double r = x.norm();
    const vec_t u = r > tiny_ ? vec_t(x / r) : vec_t(vec_t::Unit(d_, 0));
    const double au = u.dot(a), bu = u.dot(b), cu = u.dot(c), eu = u.dot(e);
    const double ab = a.dot(b) - au * bu, ac = a.dot(c) - au * cu;
    const double ae = a.dot(e) - au * eu;
    const double bc = b.dot(c) - bu * cu, be = b.dot(e) - bu * eu, ce = c.dot(e) - cu * eu;
    const double m44 = moment(4, 4, r), m42 = moment(4, 2, r), m40 = moment(4, 0, r);
    const double pair_sum = au * bu * ce + au * cu * be + au * eu * bc + bu * cu * ae +
                            bu * eu * ac + cu * eu * ab;
    const double isserlis = ab * ce + ac * be + ae * bc;
    return n_ * (m44 * au * bu * cu * eu + m42 * pair_sum + m40 * isserlis);
  }

 private:
  // E[psi^(k)(r Z) Z^p]
  double moment(int k, int p, double r) const {
    double acc = 0.0;
    const double sqrt2 = std::sqrt(2.0);
    for (index_t i = 0; i < nodes_.size(); ++i) {
      const double z = sqrt2 * nodes_[i];
      acc += weights_[i] * psik(k, r * z) * std::pow(z, p);
    }
    return acc / std::sqrt(3.14159265358979323846264338327950288);
  }

  static constexpr double tiny_ = 1e-13;
  index_t d_;
  double n_;
  vec_t nodes_, weights_;
  double a11_;
};

}  // namespace

PopulationLogistic make_population_logistic(index_t d, double n, int quad_nodes) {
  if (d < 1 || n <= 0.0) throw ArgumentError("population logistic: bad d or n");
  PopulationLogistic pop;
  pop.d = d;
  pop.n = n;
  pop.quad_nodes = quad_nodes;
  gauss_hermite(quad_nodes, pop.gh_nodes_, pop.gh_weights_);
  pop.model = std::make_shared<PopulationModel>(d, n, pop.gh_nodes_, pop.gh_weights_);
  return pop;
}

PopulationLeadingTerms population_leading_terms(const PopulationLogistic& pop) {
  const double a20 = pop.a(2, 0), a22 = pop.a(2, 2);
  const double a31 = pop.a(3, 1), a33 = pop.a(3, 3);
  const double dm1 = static_cast<double>(pop.d - 1);
  const double sqn = std::sqrt(pop.n);
  PopulationLeadingTerms out;
  out.ltv_lower =
      (dm1 * std::abs(a31) / (8.0 * a20) - std::abs(a33) / (4.0 * a22)) / (std::sqrt(a22) * sqn);
  out.delta_norm =
      std::abs(dm1 * a31 / a20 + a33 / a22) / (2.0 * std::sqrt(a22) * sqn);
  return out;
}

}  // namespace skewlap
