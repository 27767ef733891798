#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skewlap/diagnostics.hpp"
#include "skewlap/errors.hpp"
#include "skewlap/experiments.hpp"
#include "skewlap/laplace.hpp"
#include "skewlap/logreg.hpp"
#include "skewlap/multinomial.hpp"
#include "skewlap/quadrature.hpp"
#include "skewlap/rng.hpp"

namespace {

using namespace skewlap;

struct ModelArgs {
  std::string counts;
  std::string data_csv;
  double prior_precision = 0.0;
  index_t gen_n = 0;
  index_t gen_d = 0;
  index_t population_d = 0;
  double population_n = 0.0;
  std::uint64_t seed = 0;
};

void add_model_flags(CLI::App* cmd, ModelArgs& args) {
  cmd->add_option("--counts", args.counts,
                  "multinomial counts, comma-separated integers or a one-column CSV path");
  cmd->add_option("--data", args.data_csv, "logistic dataset CSV (header y,x1..xd)");
  cmd->add_option("--prior-precision", args.prior_precision,
                  "kappa for the Gaussian prior precision kappa*I (0 = flat)");
  cmd->add_option("--gen-n", args.gen_n, "generate a logistic dataset with n samples");
  cmd->add_option("--gen-d", args.gen_d, "dimension for --gen-n (beta = e1, M = I)");
  cmd->add_option("--population-d", args.population_d, "population logistic dimension");
  cmd->add_option("--population-n", args.population_n, "population logistic n");
  cmd->add_option("--seed", args.seed, "seed");
}

struct ResolvedModel {
  std::shared_ptr<const PosteriorModel> model;
  vec_t x0;
  std::string name;
};

ResolvedModel resolve_model(const ModelArgs& args) {
  ResolvedModel rm;
  if (!args.counts.empty()) {
    Eigen::VectorXi counts;
    if (args.counts.find(',') == std::string::npos &&
        std::filesystem::exists(std::filesystem::path(args.counts)))
      counts = read_counts_csv(args.counts);
    else
      counts = parse_counts(args.counts);
    const MultinomialPosterior mp = make_multinomial(counts);
    rm.model = mp.model;
    rm.x0 = vec_t::Constant(mp.d(), 1.0 / static_cast<double>(mp.d() + 1));
    rm.name = "multinomial";
    return rm;
  }
  if (!args.data_csv.empty()) {
    LogRegPosterior post = build_posterior(read_logreg_csv(args.data_csv), args.prior_precision);
    rm.model = post.model;
    rm.x0 = vec_t::Zero(post.model->dim());
    rm.name = "logistic";
    return rm;
  }
  if (args.gen_n > 0 && args.gen_d > 0) {
    LogRegDataset data = generate_data(args.gen_n, args.gen_d, vec_t::Unit(args.gen_d, 0),
                                       mat_t::Identity(args.gen_d, args.gen_d), args.seed);
    LogRegPosterior post = build_posterior(std::move(data), args.prior_precision);
    rm.model = post.model;
    rm.x0 = vec_t::Zero(args.gen_d);
    rm.name = "logistic(generated)";
    return rm;
  }
  if (args.population_d > 0 && args.population_n > 0.0) {
    const PopulationLogistic pop = make_population_logistic(args.population_d, args.population_n);
    rm.model = pop.model;
    rm.x0 = vec_t::Unit(args.population_d, 0);
    rm.name = "population-logistic";
    return rm;
  }
  throw ArgumentError(
      "no model selected: pass --counts, --data, --gen-n/--gen-d or --population-d/--population-n");
}

int run_check_derivs(const ModelArgs& args, int points, double tol, double step) {
  const ResolvedModel rm = resolve_model(args);
  const index_t d = rm.model->dim();
  Rng rng(Rng::mix(args.seed + 17));
  bool all_pass = true;
  for (int p = 0; p < points; ++p) {
    // random point near the start; retry into the domain when needed
    vec_t x;
    int tries = 0;
    do {
      x = rm.x0 + 0.05 * rng.normal_vec(d);
    } while (!rm.model->domain_guard(x) && ++tries < 100);
    const DerivativeCheckReport rep = check_derivatives(*rm.model, x, step, tol);
    all_pass = all_pass && rep.pass;
    std::printf("point %2d: grad %.3e hess %.3e third %.3e %s\n", p, rep.max_rel_err_gradient,
                rep.max_rel_err_hessian, rep.max_rel_err_third, rep.pass ? "PASS" : "FAIL");
    for (const auto& f : rep.failures) std::printf("          failure: %s\n", f.c_str());
  }
  std::printf("%s derivative check: %s (tol %.1e)\n", rm.name.c_str(),
              all_pass ? "PASS" : "FAIL", tol);
  return all_pass ? 0 : 3;
}

int run_fit(const ModelArgs& args) {
  const ResolvedModel rm = resolve_model(args);
  const ModeResult mode = find_mode(*rm.model, rm.x0);
  if (!mode.converged) {
    std::fprintf(stderr, "mode finder did not converge (%d iterations%s)\n", mode.iterations,
                 mode.diverged ? ", diverged" : "");
    return 3;
  }
  const LaplaceFit fit = fit_laplace(*rm.model, mode.mode);
  std::printf("model: %s\nmode:", rm.name.c_str());
  for (index_t i = 0; i < fit.dim(); ++i) std::printf(" %.12g", fit.mode[i]);
  std::printf("\niterations: %d  gradient_fallbacks: %d\nlog_det_hess: %.12g\n", mode.iterations,
              mode.gradient_fallbacks, fit.log_det_hess);
  const vec_t corrected = corrected_mean(*rm.model, fit);
  std::printf("corrected_mean:");
  for (index_t i = 0; i < fit.dim(); ++i) std::printf(" %.12g", corrected[i]);
  std::printf("\n");
  return 0;
}

int run_diagnose(const ModelArgs& args, const DiagnosticsOptions& opts, const std::string& json_path) {
  const ResolvedModel rm = resolve_model(args);
  const ModeResult mode = find_mode(*rm.model, rm.x0);
  if (!mode.converged) {
    std::fprintf(stderr, "mode finder did not converge\n");
    return 3;
  }
  const LaplaceFit fit = fit_laplace(*rm.model, mode.mode);
  const ThirdMode tm = rm.model->has_rank1_third() ? ThirdMode::low_rank : ThirdMode::dense;
  const SkewCorrection sc = make_skew_correction(*rm.model, fit, tm);
  const DiagnosticsReport rep = assemble_report(*rm.model, fit, sc, opts);
  const std::string payload = rep.to_json();
  if (json_path.empty()) {
    std::printf("%s\n", payload.c_str());
  } else {
    std::ofstream out(json_path);
    if (!out) throw ArgumentError("cannot open for writing: " + json_path);
    out << payload << "\n";
  }
  return 0;
}

std::vector<index_t> to_index_list(const std::vector<long long>& v) {
  std::vector<index_t> out;
  for (long long x : v) {
    if (x <= 0) throw ArgumentError("list entries must be positive");
    out.push_back(static_cast<index_t>(x));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplace and skew-corrected Laplace approximations with computable diagnostics"};
  app.require_subcommand(1);

  ModelArgs margs;
  int cd_points = 20;
  double cd_tol = 1e-4, cd_step = 0.0;
  auto* check = app.add_subcommand("check-derivs", "finite-difference derivative verification");
  add_model_flags(check, margs);
  check->add_option("--points", cd_points, "number of random points");
  check->add_option("--tol", cd_tol, "pass tolerance");
  check->add_option("--step", cd_step, "finite-difference step (0 = auto)");

  ModelArgs fargs;
  auto* fitcmd = app.add_subcommand("fit", "find the mode and report the Laplace fit");
  add_model_flags(fitcmd, fargs);

  ModelArgs dargs;
  DiagnosticsOptions dopts;
  std::string diag_json;
  long long diag_mc = 100000;
  auto* diag = app.add_subcommand("diagnose", "full diagnostics report as JSON");
  add_model_flags(diag, dargs);
  diag->add_option("--radius", dopts.s, "radius s (0 = select automatically)");
  diag->add_option("--restarts", dopts.restarts, "opnorm restarts");
  diag->add_option("--mc-count", diag_mc, "L_TV Monte-Carlo draws");
  diag->add_option("--growth-coeff", dopts.growth_coeff, "observable growth coefficient a_g");
  diag->add_option("--json", diag_json, "write the JSON payload here instead of stdout");

  auto* exp = app.add_subcommand("exp", "rate and scaling experiments");
  exp->require_subcommand(1);

  ExperimentSpec espec;
  std::vector<long long> n_list, d_list;
  long long mc_count = 0;
  std::string counts_arg;
  std::vector<CLI::Option*> replicate_opts;
  auto add_exp_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", espec.seed, "seed");
    cmd->add_option("--n-list", n_list, "n grid")->delimiter(',');
    cmd->add_option("--d-list", d_list, "d grid")->delimiter(',');
    replicate_opts.push_back(
        cmd->add_option("--replicates", espec.replicates, "replicates per grid point"));
    cmd->add_option("--mc-count", mc_count, "Monte-Carlo draws");
    cmd->add_option("--counts", counts_arg, "multinomial counts");
    cmd->add_option("--out", espec.out_csv, "CSV output path");
    cmd->add_option("--json", espec.out_json, "JSON output path");
    cmd->add_option("--svg", espec.out_svg, "SVG output path");
    cmd->add_flag("--full-scale", espec.full_scale, "full-size ranges (slow)");
  };
  auto* mean_rate = exp->add_subcommand("mean-rate", "Laplace vs corrected mean error in n");
  add_exp_flags(mean_rate);
  auto* prob_rate = exp->add_subcommand("prob-rate", "half-space probability error in n");
  add_exp_flags(prob_rate);
  auto* dim_scan = exp->add_subcommand("dim-scan", "L_TV and mean shift across d");
  add_exp_flags(dim_scan);
  auto* multi = exp->add_subcommand("multinomial", "exact vs generic multinomial quantities");
  add_exp_flags(multi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*check) return run_check_derivs(margs, cd_points, cd_tol, cd_step);
    if (*fitcmd) return run_fit(fargs);
    if (*diag) {
      dopts.mc_count = static_cast<skewlap::index_t>(diag_mc);
      dopts.seed = dargs.seed;
      return run_diagnose(dargs, dopts, diag_json);
    }
    espec.n_list = to_index_list(n_list);
    espec.d_list = to_index_list(d_list);
    espec.mc_count = static_cast<skewlap::index_t>(mc_count);
    if (*mean_rate) {
      const skewlap::RateResult res = skewlap::run_mean_rate(espec);
      skewlap::write_rate_outputs(res, espec, "mean-rate");
      std::printf("mean-rate slopes: uncorrected %.4f corrected %.4f (redraws %d)\n",
                  res.slope_uncorrected, res.slope_corrected, res.redraws);
      return 0;
    }
    if (*prob_rate) {
      const skewlap::RateResult res = skewlap::run_prob_rate(espec);
      skewlap::write_rate_outputs(res, espec, "prob-rate");
      std::printf("prob-rate slopes: uncorrected %.4f corrected %.4f (redraws %d)\n",
                  res.slope_uncorrected, res.slope_corrected, res.redraws);
      return 0;
    }
    if (*dim_scan) {
      bool replicates_given = false;
      for (const auto* opt : replicate_opts) replicates_given = replicates_given || opt->count();
      if (!replicates_given) espec.replicates = 20;
      const skewlap::DimScanResult res = skewlap::run_dim_scan(espec);
      skewlap::write_dim_scan_outputs(res, espec);
      std::printf(
          "dim-scan: L_TV slope %.4f mean-shift slope %.4f (n=d^2.5); L_TV max/min %.3f (n=2d^2)\n",
          res.slope_ltv_d25, res.slope_shift_d25, res.ltv_flatness_2d2);
      return 0;
    }
    if (*multi) {
      if (counts_arg.empty()) throw skewlap::ArgumentError("exp multinomial needs --counts");
      espec.counts = skewlap::parse_counts(counts_arg);
      const skewlap::MultinomialExactRun run = skewlap::run_multinomial_exact(espec);
      skewlap::write_multinomial_outputs(run, espec);
      std::printf("eps_bar3 exact %.12g generic %.12g\n", run.exact.eps_bar3_exact,
                  run.eps_bar3_generic);
      std::printf("eps3 exact %.12g opnorm %s\n", run.exact.eps3_exact,
                  run.eps3_opnorm ? std::to_string(*run.eps3_opnorm).c_str() : "(d > 5, skipped)");
      std::printf("delta err %.3e identity residual %.3e\n", run.delta_err,
                  run.identity_residual_norm);
      std::printf("tv lower bound: %s\n",
                  run.tv_lb ? std::to_string(*run.tv_lb).c_str() : "absent (preconditions fail)");
      std::printf("L_TV %.6g (se %.2g)\n", run.ltv.value, run.ltv.std_error);
      if (run.quad_tv_laplace)
        std::printf("quadrature TV: laplace %.6g skew %.6g  R_TV %.6g\n", *run.quad_tv_laplace,
                    *run.quad_tv_skew, *run.r_tv);
      std::printf("d^2/(n p_min) = %.6g\n", run.dsq_over_npmin);
      return 0;
    }
  } catch (const skewlap::ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const skewlap::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
