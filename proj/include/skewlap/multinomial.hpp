#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skewlap/model.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

// Dirichlet posterior from a multinomial count vector under a flat prior:
// pi^d ~ exp(-n v^d) on the open simplex in the d marginal coordinates
// (theta_1..theta_d), v^d(theta) = -p_0 log(1 - sum theta_j) - sum p_j log theta_j,
// p_j = N_j / n. Every quantity the rest of the library estimates has a
// closed form here, which makes this the repo's exactness oracle.
struct MultinomialPosterior {
  Eigen::VectorXi counts;  // N_0..N_d, all > 0
  long long n = 0;         // sum of counts
  vec_t freqs;             // p, length d+1
  double p_min = 0.0;
  std::shared_ptr<const PosteriorModel> model;  // d-dimensional marginal potential

  index_t d() const { return freqs.size() - 1; }
};

MultinomialPosterior make_multinomial(const Eigen::VectorXi& counts);

// Comma-separated integers or a one-column CSV file.
Eigen::VectorXi parse_counts(const std::string& text);
Eigen::VectorXi read_counts_csv(const std::string& path);

// All vectors live in the full d+1 coordinates (index 0 first); drop the
// zeroth entry to land in the marginal coordinates of the model.
struct MultinomialExact {
  vec_t mode;          // p
  vec_t mean;          // (N_j + 1) / (n + d + 1)
  vec_t delta_mode;    // (1/n) 1 - ((d+1)/n) p
  vec_t identity_residual;  // (mean - mode) - delta_mode / (1 + (d+1)/n)
  double eps3_exact = 0.0;
  double eps_bar3_exact = 0.0;
  double chi2_unif = 0.0;
  double skew_norm = 0.0;       // |delta_mode^d|_{H_V}
  double remainder_norm = 0.0;  // |mean^d - mode^d - delta_mode^d|_{H_V}
};

MultinomialExact exact_quantities(const MultinomialPosterior& mp);

// Exact H_v-weighted operator norm of grad^k v at the mode, k = 3, 4, 5.
double multinomial_ck0_exact(const MultinomialPosterior& mp, int k);

// (1/9) TV(Unif_{d+1}, p) d / sqrt(n) when p_min >= 6/sqrt(n+d) and
// TV(Unif_{d+1}, p) >= 6/(d+1); absent otherwise.
std::optional<double> tv_lower_bound(const MultinomialPosterior& mp);

double tv_uniform(const vec_t& freqs);  // (1/2) sum |1/(d+1) - p_j|

}  // namespace skewlap
