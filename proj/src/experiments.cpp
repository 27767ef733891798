#include "skewlap/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skewlap/errors.hpp"
#include "skewlap/logreg.hpp"
#include "skewlap/quadrature.hpp"
#include "skewlap/rng.hpp"
#include "skewlap/svg.hpp"

namespace skewlap {

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::uint64_t derive2(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return Rng::mix(Rng::mix(seed ^ Rng::mix(a)) ^ Rng::mix(b));
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::string git_revision() {
  FILE* p = ::popen("git rev-parse --short HEAD 2>/dev/null", "r");
  if (!p) return "unknown";
  char buf[64] = {0};
  std::string rev = "unknown";
  if (::fgets(buf, sizeof(buf), p)) {
    rev = buf;
    while (!rev.empty() && (rev.back() == '\n' || rev.back() == '\r')) rev.pop_back();
  }
  ::pclose(p);
  return rev.empty() ? "unknown" : rev;
}

// One converged d-dimensional flat-prior logistic posterior; separated draws
// are redrawn with a derived seed.
struct FittedReplicate {
  LogRegPosterior post;
  LaplaceFit fit;
  int redraws = 0;
};

FittedReplicate fit_logistic_replicate(index_t n, index_t d, std::uint64_t seed) {
  const vec_t beta = vec_t::Unit(d, 0);
  const mat_t M = mat_t::Identity(d, d);
  for (int attempt = 0; attempt < 20; ++attempt) {
    LogRegDataset data = generate_data(n, d, beta, M, Rng::mix(seed + attempt));
    LogRegPosterior post = build_posterior(std::move(data), 0.0);
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(d), 200,
                                      1e-10 * std::sqrt(static_cast<double>(d)));
    if (!mode.converged || mode.diverged) continue;
    LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    return FittedReplicate{std::move(post), std::move(fit), attempt};
  }
  throw NumericalError("logistic replicate: no MAP after 20 redraws (n too small?)");
}

std::vector<index_t> default_rate_grid() { return {20, 40, 80, 160, 320, 640}; }

void finish_rate(RateResult& res) {
  if (res.rows.size() < 2) {
    res.slope_uncorrected = res.slope_corrected = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  std::vector<std::pair<double, double>> unc, cor;
  for (const auto& r : res.rows) {
    unc.emplace_back(r.n, r.err_uncorrected);
    cor.emplace_back(r.n, r.err_corrected);
  }
  res.slope_uncorrected = loglog_slope(unc);
  res.slope_corrected = loglog_slope(cor);
}

}  // namespace

double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ArgumentError("loglog_slope: need at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw ArgumentError("loglog_slope: points must be positive");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(points.size());
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw ArgumentError("loglog_slope: degenerate abscissae");
  return (m * sxy - sx * sy) / denom;
}

RateResult run_mean_rate(const ExperimentSpec& spec) {
  const index_t d = 2;
  const auto n_list = spec.n_list.empty() ? default_rate_grid() : spec.n_list;
  if (!std::is_sorted(n_list.begin(), n_list.end()))
    throw ArgumentError("mean-rate: n_list must be ascending");
  const int reps = spec.replicates;
  const QuadratureGrid grid = default_grid(d);

  Stopwatch clock;
  RateResult res;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    std::vector<double> unc, cor;
    for (int r = 0; r < reps; ++r) {
      FittedReplicate rep = fit_logistic_replicate(n_list[ni], d, derive2(spec.seed, ni, r));
      res.redraws += rep.redraws;
      const vec_t xbar = true_mean(*rep.post.model, rep.fit, grid);
      const vec_t delta = fast_skew(rep.post, rep.fit, false).delta_mode;
      unc.push_back(rep.fit.hv_norm(xbar - rep.fit.mode));
      cor.push_back(rep.fit.hv_norm(xbar - rep.fit.mode - delta));
    }
    RateRow row;
    row.n = static_cast<double>(n_list[ni]);
    row.err_uncorrected = std::accumulate(unc.begin(), unc.end(), 0.0) / unc.size();
    row.err_corrected = std::accumulate(cor.begin(), cor.end(), 0.0) / cor.size();
    row.unc_q25 = quantile(unc, 0.25);
    row.unc_q75 = quantile(unc, 0.75);
    row.cor_q25 = quantile(cor, 0.25);
    row.cor_q75 = quantile(cor, 0.75);
    res.rows.push_back(row);
  }
  finish_rate(res);
  res.wall_seconds = clock.seconds();
  return res;
}

RateResult run_prob_rate(const ExperimentSpec& spec) {
  const index_t d = 2;
  const auto n_list = spec.n_list.empty() ? default_rate_grid() : spec.n_list;
  if (!std::is_sorted(n_list.begin(), n_list.end()))
    throw ArgumentError("prob-rate: n_list must be ascending");
  const int reps = spec.replicates;
  const index_t mc = spec.mc_count > 0 ? spec.mc_count : 1000000;
  const QuadratureGrid grid = default_grid(d);

  Stopwatch clock;
  RateResult res;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    std::vector<double> unc, cor;
    for (int r = 0; r < reps; ++r) {
      FittedReplicate rep = fit_logistic_replicate(n_list[ni], d, derive2(spec.seed, 1000 + ni, r));
      res.redraws += rep.redraws;
      const double p_true =
          true_halfspace_prob(*rep.post.model, rep.fit, vec_t::Unit(d, 0), grid);
      const SkewCorrection sc = make_skew_correction(*rep.post.model, rep.fit);
      const double b1 = rep.fit.mode[0];
      const Observable indicator = [b1](const vec_t& x) { return x[0] >= b1 ? 1.0 : 0.0; };
      // antithetic pairs: for a half-space through the mode the pair average
      // is 1/2 + S(z)(1_A(z) - 1/2), which removes the indicator's own
      // variance and leaves the skew term visible at 1e6 draws
      const double p_skew =
          corrected_integral_mc(sc, rep.fit, indicator, mc, derive2(spec.seed, 2000 + ni, r),
                                /*antithetic=*/true)
              .estimate;
      unc.push_back(std::abs(p_true - 0.5));
      cor.push_back(std::abs(p_true - p_skew));
    }
    RateRow row;
    row.n = static_cast<double>(n_list[ni]);
    row.err_uncorrected = std::accumulate(unc.begin(), unc.end(), 0.0) / unc.size();
    row.err_corrected = std::accumulate(cor.begin(), cor.end(), 0.0) / cor.size();
    row.unc_q25 = quantile(unc, 0.25);
    row.unc_q75 = quantile(unc, 0.75);
    row.cor_q25 = quantile(cor, 0.25);
    row.cor_q75 = quantile(cor, 0.75);
    res.rows.push_back(row);
  }
  finish_rate(res);
  res.wall_seconds = clock.seconds();
  return res;
}

DimScanResult run_dim_scan(const ExperimentSpec& spec) {
  std::vector<index_t> d_list = spec.d_list;
  if (d_list.empty())
    d_list = spec.full_scale ? std::vector<index_t>{10, 14, 20, 28, 40, 57, 80}
                             : std::vector<index_t>{10, 14, 20, 28, 40};
  if (!std::is_sorted(d_list.begin(), d_list.end()))
    throw ArgumentError("dim-scan: d_list must be ascending");
  const int reps = spec.replicates > 0 ? spec.replicates : 20;
  const index_t mc = spec.mc_count > 0 ? spec.mc_count : (spec.full_scale ? 100000 : 20000);

  Stopwatch clock;
  DimScanResult res;
  for (int regime = 0; regime < 2; ++regime) {
    auto& rows = regime == 0 ? res.regime_2d2 : res.regime_d25;
    for (std::size_t di = 0; di < d_list.size(); ++di) {
      const index_t d = d_list[di];
      const index_t n = regime == 0
                            ? 2 * d * d
                            : static_cast<index_t>(std::llround(std::pow(double(d), 2.5)));
      std::vector<double> ltvs, shifts;
      for (int r = 0; r < reps; ++r) {
        FittedReplicate rep =
            fit_logistic_replicate(n, d, derive2(spec.seed, 5000 + 100 * regime + di, r));
        const FastSkew fs = fast_skew(rep.post, rep.fit, false);
        shifts.push_back(rep.fit.hv_norm(fs.delta_mode));
        const WhitenedThird tensor = whitened_third(*rep.post.model, rep.fit, ThirdMode::low_rank);
        ltvs.push_back(ltv_mc(tensor, mc, derive2(spec.seed, 7000 + 100 * regime + di, r)).value);
      }
      DimScanRow row;
      row.d = d;
      row.n = static_cast<double>(n);
      row.ltv = std::accumulate(ltvs.begin(), ltvs.end(), 0.0) / ltvs.size();
      row.mean_shift = std::accumulate(shifts.begin(), shifts.end(), 0.0) / shifts.size();
      row.ltv_q_lo = quantile(ltvs, 0.1);
      row.ltv_q_hi = quantile(ltvs, 0.9);
      row.shift_q_lo = quantile(shifts, 0.1);
      row.shift_q_hi = quantile(shifts, 0.9);
      rows.push_back(row);
    }
  }

  std::vector<std::pair<double, double>> pl, ps;
  for (const auto& r : res.regime_d25) {
    pl.emplace_back(static_cast<double>(r.d), r.ltv);
    ps.emplace_back(static_cast<double>(r.d), r.mean_shift);
  }
  res.slope_ltv_d25 = loglog_slope(pl);
  res.slope_shift_d25 = loglog_slope(ps);
  double lmax = 0.0, lmin = 1e300;
  for (const auto& r : res.regime_2d2) {
    lmax = std::max(lmax, r.ltv);
    lmin = std::min(lmin, r.ltv);
  }
  res.ltv_flatness_2d2 = lmax / lmin;
  res.wall_seconds = clock.seconds();
  return res;
}

MultinomialExactRun run_multinomial_exact(const ExperimentSpec& spec) {
  if (spec.counts.size() < 2) throw ArgumentError("multinomial: counts required");
  const MultinomialPosterior mp = make_multinomial(spec.counts);
  const index_t d = mp.d();
  const double n = static_cast<double>(mp.n);
  const index_t mc = spec.mc_count > 0 ? spec.mc_count : 100000;

  Stopwatch clock;
  MultinomialExactRun run;
  run.exact = exact_quantities(mp);
  run.dsq_over_npmin = static_cast<double>(d * d) / (n * mp.p_min);
  run.identity_residual_norm = run.exact.identity_residual.norm();
  run.tv_lb = tv_lower_bound(mp);

  const ModeResult mode =
      find_mode(*mp.model, vec_t::Constant(d, 1.0 / static_cast<double>(d + 1)));
  if (!mode.converged) throw NumericalError("multinomial: mode finder did not converge");
  const LaplaceFit fit = fit_laplace(*mp.model, mode.mode);
  const SkewCorrection sc = make_skew_correction(*mp.model, fit);
  run.eps_bar3_generic = sc.eps_bar3;
  run.delta_err = (sc.delta_mode - run.exact.delta_mode.tail(d)).norm();
  run.ltv = ltv_mc(sc.tensor, mc, Rng::mix(spec.seed + 3));

  if (d <= 5) {
    const OpnormEstimate c3 = weighted_opnorm(*mp.model, fit, 3, 0.0, 50, Rng::mix(spec.seed + 9));
    run.eps3_opnorm = c3.estimate * static_cast<double>(d) / std::sqrt(n);
    run.opnorm_converged = c3.converged;
  }
  if (d <= 2) {
    const QuadratureGrid grid = default_grid(d);
    run.quad_tv_laplace = true_tv(*mp.model, fit, TvAgainst::laplace, grid);
    run.quad_tv_skew = true_tv(*mp.model, fit, TvAgainst::skew_corrected, grid, &sc);
    run.r_tv = *run.quad_tv_laplace - run.ltv.value;
  }
  run.wall_seconds = clock.seconds();
  return run;
}

namespace {

void write_csv_rows(const std::string& path, const std::string& header,
                    const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path);
  out.precision(17);
  out << header << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << "\n";
  }
}

nlohmann::json meta_json(const ExperimentSpec& spec, double wall_seconds) {
  nlohmann::json m;
  m["seed"] = spec.seed;
  m["git_revision"] = git_revision();
  m["wall_time_seconds"] = wall_seconds;
  m["replicates"] = spec.replicates;
  m["full_scale"] = spec.full_scale;
  return m;
}

}  // namespace

void write_rate_outputs(const RateResult& res, const ExperimentSpec& spec,
                        const std::string& experiment_name) {
  if (!spec.out_csv.empty()) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : res.rows)
      rows.push_back({r.n, r.err_uncorrected, r.err_corrected, r.unc_q25, r.unc_q75, r.cor_q25,
                      r.cor_q75});
    write_csv_rows(spec.out_csv,
                   "n,err_uncorrected,err_corrected,unc_q25,unc_q75,cor_q25,cor_q75", rows);
  }
  if (!spec.out_json.empty()) {
    nlohmann::json j;
    j["experiment"] = experiment_name;
    j["slope_uncorrected"] = res.slope_uncorrected;
    j["slope_corrected"] = res.slope_corrected;
    j["redraws"] = res.redraws;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : res.rows)
      j["rows"].push_back({{"n", r.n},
                           {"err_uncorrected", r.err_uncorrected},
                           {"err_corrected", r.err_corrected}});
    j["meta"] = meta_json(spec, res.wall_seconds);
    std::ofstream out(spec.out_json);
    out << j.dump(2) << "\n";
  }
  if (!spec.out_svg.empty()) {
    SvgSeries unc, cor;
    unc.color = "#1f77b4";
    unc.label = "uncorrected";
    cor.color = "#d62728";
    cor.label = "corrected";
    for (const auto& r : res.rows) {
      unc.x.push_back(r.n);
      unc.y.push_back(r.err_uncorrected);
      unc.band_lo.push_back(r.unc_q25);
      unc.band_hi.push_back(r.unc_q75);
      cor.x.push_back(r.n);
      cor.y.push_back(r.err_corrected);
      cor.band_lo.push_back(r.cor_q25);
      cor.band_hi.push_back(r.cor_q75);
    }
    write_loglog_svg(spec.out_svg, {unc, cor}, experiment_name + " error vs n", "n", "error");
  }
}

void write_dim_scan_outputs(const DimScanResult& res, const ExperimentSpec& spec) {
  if (!spec.out_csv.empty()) {
    std::vector<std::vector<double>> rows;
    for (int regime = 0; regime < 2; ++regime)
      for (const auto& r : (regime == 0 ? res.regime_2d2 : res.regime_d25))
        rows.push_back({static_cast<double>(regime), static_cast<double>(r.d), r.n, r.ltv,
                        r.ltv_q_lo, r.ltv_q_hi, r.mean_shift, r.shift_q_lo, r.shift_q_hi});
    write_csv_rows(spec.out_csv,
                   "regime,d,n,ltv,ltv_q_lo,ltv_q_hi,mean_shift,shift_q_lo,shift_q_hi", rows);
  }
  if (!spec.out_json.empty()) {
    nlohmann::json j;
    j["experiment"] = "dim-scan";
    j["slope_ltv_d25"] = res.slope_ltv_d25;
    j["slope_shift_d25"] = res.slope_shift_d25;
    j["ltv_flatness_2d2"] = res.ltv_flatness_2d2;
    j["meta"] = meta_json(spec, res.wall_seconds);
    std::ofstream out(spec.out_json);
    out << j.dump(2) << "\n";
  }
  if (!spec.out_svg.empty()) {
    SvgSeries flat, scan;
    flat.color = "#1f77b4";
    flat.label = "n = 2 d^2";
    scan.color = "#d62728";
    scan.label = "n = d^2.5";
    for (const auto& r : res.regime_2d2) {
      flat.x.push_back(static_cast<double>(r.d));
      flat.y.push_back(r.ltv);
      flat.band_lo.push_back(r.ltv_q_lo);
      flat.band_hi.push_back(r.ltv_q_hi);
    }
    for (const auto& r : res.regime_d25) {
      scan.x.push_back(static_cast<double>(r.d));
      scan.y.push_back(r.ltv);
      scan.band_lo.push_back(r.ltv_q_lo);
      scan.band_hi.push_back(r.ltv_q_hi);
    }
    write_loglog_svg(spec.out_svg, {flat, scan}, "L_TV vs d", "d", "L_TV");
  }
}

void write_multinomial_outputs(const MultinomialExactRun& run, const ExperimentSpec& spec) {
  if (!spec.out_json.empty()) {
    nlohmann::json j;
    j["experiment"] = "multinomial-exact";
    j["eps_bar3_exact"] = run.exact.eps_bar3_exact;
    j["eps_bar3_generic"] = run.eps_bar3_generic;
    j["eps3_exact"] = run.exact.eps3_exact;
    j["eps3_opnorm"] = run.eps3_opnorm ? nlohmann::json(*run.eps3_opnorm) : nlohmann::json(nullptr);
    j["opnorm_converged"] = run.opnorm_converged;
    j["delta_err"] = run.delta_err;
    j["identity_residual_norm"] = run.identity_residual_norm;
    j["skew_norm"] = run.exact.skew_norm;
    j["remainder_norm"] = run.exact.remainder_norm;
    j["chi2_unif"] = run.exact.chi2_unif;
    j["tv_lower_bound"] = run.tv_lb ? nlohmann::json(*run.tv_lb) : nlohmann::json(nullptr);
    j["quad_tv_laplace"] =
        run.quad_tv_laplace ? nlohmann::json(*run.quad_tv_laplace) : nlohmann::json(nullptr);
    j["quad_tv_skew"] =
        run.quad_tv_skew ? nlohmann::json(*run.quad_tv_skew) : nlohmann::json(nullptr);
    j["ltv"] = {{"value", run.ltv.value}, {"std_error", run.ltv.std_error}};
    j["r_tv"] = run.r_tv ? nlohmann::json(*run.r_tv) : nlohmann::json(nullptr);
    j["dsq_over_npmin"] = run.dsq_over_npmin;
    j["meta"] = meta_json(spec, run.wall_seconds);
    std::ofstream out(spec.out_json);
    out << j.dump(2) << "\n";
  }
}

RateResult read_rate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open: " + path);
  std::string line;
  std::getline(in, line);  // header
  RateResult res;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() != 7) throw ArgumentError("rate csv row has wrong arity");
    RateRow r;
    r.n = vals[0];
    r.err_uncorrected = vals[1];
    r.err_corrected = vals[2];
    r.unc_q25 = vals[3];
    r.unc_q75 = vals[4];
    r.cor_q25 = vals[5];
    r.cor_q75 = vals[6];
    res.rows.push_back(r);
  }
  finish_rate(res);
  return res;
}

}  // namespace skewlap
