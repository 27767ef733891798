#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "skewlap/laplace.hpp"
#include "skewlap/model.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// Numerically stable sigmoid chain: psi(t) = log(1 + e^t) and derivatives.
double sigmoid(double t);
double psi(double t);
double psi2(double t);  // sigma (1 - sigma)
double psi3(double t);  // psi2 (1 - 2 sigma)
double psi4(double t);  // psi2 (1 - 6 sigma + 6 sigma^2)
double psi5(double t);  // psi3 (1 - 12 sigma + 12 sigma^2)

struct LogRegDataset {
  mat_t features;   // n x d, rows X_i
  vec_t labels;     // 0/1
  mat_t design_cov; // M
  std::optional<vec_t> truth;  // beta when generated
};

// X_i iid N(0, M), Y_i | X_i ~ Bernoulli(sigma(beta . X_i)); deterministic
// per seed.
LogRegDataset generate_data(index_t n, index_t d, const vec_t& beta, const mat_t& M,
                            std::uint64_t seed);

// CSV with header y,x1,...,xd.
void write_logreg_csv(const std::string& path, const LogRegDataset& data);
LogRegDataset read_logreg_csv(const std::string& path);

// V(b) = -sum Y_i X_i.b + sum psi(X_i.b) + (1/2) b.P b, P = prior precision
// (zero for a flat prior). All contractions run in O(n d).
struct LogRegPosterior {
  LogRegDataset data;
  mat_t prior_precision;
  std::shared_ptr<const PosteriorModel> model;
};

LogRegPosterior build_posterior(LogRegDataset data, const mat_t& prior_precision);
LogRegPosterior build_posterior(LogRegDataset data, double kappa = 0.0);  // P = kappa I

struct FastSkew {
  vec_t delta_mode;   // -1/2 sum psi3(Xl.bhat) (Xl.H^{-1}Xl) H^{-1} Xl
  double eps_bar3;    // pairwise sum over B_l = L^{-1} X_l
  std::function<double(const vec_t&)> skew_closure;  // S(b), O(n d) per call
};

// GLM fast paths for the skew correction; matches the generic dense pipeline.
// The pairwise eps_bar3 sum costs O(n^2 d); pass compute_eps_bar3 = false to
// skip it (eps_bar3 is then NaN).
FastSkew fast_skew(const LogRegPosterior& posterior, const LaplaceFit& fit,
                   bool compute_eps_bar3 = true);

// Population-level potential v(x) = E[psi(Z.x)] - E[psi'(Z_1)] x_1 with
// Z ~ N(0, I), minimised at e_1; derivatives reduce to 1-D Gauss-Hermite
// integrals through the rotational structure.
struct PopulationLogistic {
  index_t d = 1;
  double n = 1.0;
  int quad_nodes = 200;
  std::shared_ptr<const PosteriorModel> model;

  // a_{k,p} = E[psi^(k)(Z_1) Z_1^p]
  double a(int k, int p) const;

 private:
  friend PopulationLogistic make_population_logistic(index_t, double, int);
  vec_t gh_nodes_, gh_weights_;
};

PopulationLogistic make_population_logistic(index_t d, double n, int quad_nodes = 200);

struct PopulationLeadingTerms {
  double ltv_lower = 0.0;  // lower bound on L_TV
  double delta_norm = 0.0; // |delta x_hat|_{H_V}, exact
};

PopulationLeadingTerms population_leading_terms(const PopulationLogistic& pop);

}  // namespace skewlap
