#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skewlap/diagnostics.hpp"
#include "skewlap/multinomial.hpp"
#include "skewlap/types.hpp"

namespace skewlap {

struct ExperimentSpec {
  std::vector<index_t> n_list;
  std::vector<index_t> d_list;
  int replicates = 10;
  std::uint64_t seed = 0;
  index_t mc_count = 0;  // 0 picks the per-experiment default
  Eigen::VectorXi counts;
  bool full_scale = false;
  std::string out_csv;
  std::string out_json;
  std::string out_svg;
};

// Ordinary least squares slope of log y on log x; needs >= 2 positive points.
double loglog_slope(const std::vector<std::pair<double, double>>& points);

struct RateRow {
  double n = 0.0;
  double err_uncorrected = 0.0;  // mean over replicates
  double err_corrected = 0.0;
  double unc_q25 = 0.0, unc_q75 = 0.0;
  double cor_q25 = 0.0, cor_q75 = 0.0;
};

struct RateResult {
  std::vector<RateRow> rows;
  double slope_uncorrected = 0.0;
  double slope_corrected = 0.0;
  int redraws = 0;  // replicates that had to be redrawn (no MAP)
  double wall_seconds = 0.0;
};

// d = 2 logistic regression, flat prior, beta = e1, standard normal design.
// Per n: |H_V^{1/2}(xbar - mode)| and |H_V^{1/2}(xbar - mode - delta)| with
// xbar from two-dimensional quadrature, averaged over replicates.
RateResult run_mean_rate(const ExperimentSpec& spec);

// Per n: |pi(b1 >= bhat1) - 1/2| and |pi(b1 >= bhat1) - gamma_hat_S(b1 >= bhat1)|,
// the pi probability from quadrature, the corrected one from Gaussian MC.
RateResult run_prob_rate(const ExperimentSpec& spec);

struct DimScanRow {
  index_t d = 0;
  double n = 0.0;
  double ltv = 0.0;        // mean of ltv_mc over replicates
  double ltv_q_lo = 0.0, ltv_q_hi = 0.0;
  double mean_shift = 0.0;  // mean of |delta_bhat|_{H_V}
  double shift_q_lo = 0.0, shift_q_hi = 0.0;
};

struct DimScanResult {
  std::vector<DimScanRow> regime_2d2;   // n = 2 d^2
  std::vector<DimScanRow> regime_d25;   // n = d^{5/2}
  double slope_ltv_d25 = 0.0;
  double slope_shift_d25 = 0.0;
  double ltv_flatness_2d2 = 0.0;  // max/min of the L_TV curve
  double wall_seconds = 0.0;
};

DimScanResult run_dim_scan(const ExperimentSpec& spec);

struct MultinomialExactRun {
  MultinomialExact exact;
  double eps_bar3_generic = 0.0;
  double delta_err = 0.0;              // |generic delta - closed form| (marginal coords)
  double identity_residual_norm = 0.0;
  std::optional<double> eps3_opnorm;   // d <= 5 only
  bool opnorm_converged = false;
  std::optional<double> tv_lb;
  std::optional<double> quad_tv_laplace;  // d <= 2
  std::optional<double> quad_tv_skew;
  LtvEstimate ltv;
  std::optional<double> r_tv;  // quad_tv_laplace - ltv.value
  double dsq_over_npmin = 0.0;
  double wall_seconds = 0.0;
};

MultinomialExactRun run_multinomial_exact(const ExperimentSpec& spec);

// CSV/JSON/SVG emission (paths from the spec; empty paths skip the file).
void write_rate_outputs(const RateResult& res, const ExperimentSpec& spec,
                        const std::string& experiment_name);
void write_dim_scan_outputs(const DimScanResult& res, const ExperimentSpec& spec);
void write_multinomial_outputs(const MultinomialExactRun& res, const ExperimentSpec& spec);

// Re-fit rate slopes from a written CSV (round-trip check).
RateResult read_rate_csv(const std::string& path);

}  // namespace skewlap
