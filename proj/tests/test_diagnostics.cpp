#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skewlap/diagnostics.hpp"
#include "skewlap/errors.hpp"
#include "skewlap/logreg.hpp"
#include "skewlap/multinomial.hpp"
#include "skewlap/rng.hpp"
#include "skewlap/synthetic.hpp"
#include "test_util.hpp"

using namespace skewlap;

TEST_CASE("eps_bar3: zero, 1-D value, uniform multinomial closed form") {
  CHECK(eps_bar3(WhitenedThird::zero(3)) == 0.0);

  CubicModel model(vec_t::Ones(1), 1.0);
  const LaplaceFit fit = fit_laplace(model, vec_t::Zero(1));
  const WhitenedThird t = whitened_third(model, fit);
  CHECK(eps_bar3(t) == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-12));
  CHECK(eps_bar3(t) == doctest::Approx(0.645497224367903).epsilon(1e-12));

  Eigen::VectorXi counts = Eigen::VectorXi::Constant(3, 30);  // uniform, d = 2, n = 90
  const MultinomialPosterior mp = make_multinomial(counts);
  const LaplaceFit mfit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(2)));
  CHECK(eps_bar3(whitened_third(*mp.model, mfit)) ==
        doctest::Approx(std::sqrt(4.0 / 270.0)).epsilon(1e-10));
}

TEST_CASE("eps_bar3: low-rank pairwise sum agrees with the dense tensor") {
  struct Case {
    index_t n, d;
    std::uint64_t seed;
  };
  for (const Case c : {Case{120, 8, 29}, Case{200, 20, 31}}) {
    CAPTURE(c.d);
    LogRegDataset data =
        generate_data(c.n, c.d, vec_t::Unit(c.d, 0), mat_t::Identity(c.d, c.d), c.seed);
    const LogRegPosterior post = build_posterior(std::move(data), 0.2);
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(c.d));
    REQUIRE(mode.converged);
    const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    const WhitenedThird lr = whitened_third(*post.model, fit, ThirdMode::low_rank);
    const double lr_val = eps_bar3(lr);
    const double dense_val = eps_bar3(lr.densified());
    CHECK(lr_val == doctest::Approx(dense_val).epsilon(1e-8));
    // and the GLM pairwise formula path
    CHECK(fast_skew(post, fit).eps_bar3 == doctest::Approx(dense_val).epsilon(1e-8));
  }
}

TEST_CASE("eps_bar3 stays below eps3 from a converged exhaustive estimate, d <= 3") {
  Rng rng(61);
  for (int rep = 0; rep < 4; ++rep) {
    const index_t d = 1 + rep % 3;
    vec_t w(d + 1);
    for (index_t j = 0; j <= d; ++j) w[j] = 0.2 + 0.8 * rng.next_double();
    w /= w.sum();
    Eigen::VectorXi counts(d + 1);
    for (index_t j = 0; j <= d; ++j)
      counts[j] = std::max(1, static_cast<int>(std::llround(2000.0 * w[j])));
    const MultinomialPosterior mp = make_multinomial(counts);
    const LaplaceFit fit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(d)));
    const SkewCorrection sc = make_skew_correction(*mp.model, fit);
    const OpnormEstimate c3 = weighted_opnorm(*mp.model, fit, 3, 0.0, 30, 500 + rep);
    CHECK(c3.converged);
    const double eps3 =
        c3.estimate * static_cast<double>(d) / std::sqrt(static_cast<double>(mp.n));
    CHECK(sc.eps_bar3 <= eps3 + 1e-6);
  }
}

TEST_CASE("MC estimate of |S|^2_{L2} equals eps_bar3^2 within 4 SE") {
  auto run = [](const PosteriorModel& model, const LaplaceFit& fit) {
    const SkewCorrection sc = make_skew_correction(model, fit);
    Rng rng(44);
    const index_t count = 100000, d = fit.dim();
    double sum = 0.0, sumsq = 0.0;
    for (index_t i = 0; i < count; ++i) {
      const double s = eval_skew_whitened(sc, rng.normal_vec(d));
      sum += s * s;
      sumsq += s * s * s * s;
    }
    const double mean = sum / count;
    const double se = std::sqrt(std::max(0.0, sumsq / count - mean * mean) / count);
    const double want = sc.eps_bar3 * sc.eps_bar3;
    CHECK(std::abs(mean - want) <= 4.0 * se);
  };
  Eigen::VectorXi counts(5);
  counts << 40, 25, 20, 10, 5;
  const MultinomialPosterior mp = make_multinomial(counts);
  run(*mp.model, fit_laplace(*mp.model, vec_t(mp.freqs.tail(4))));

  LogRegDataset data = generate_data(60, 5, vec_t::Unit(5, 0), mat_t::Identity(5, 5), 71);
  const LogRegPosterior post = build_posterior(std::move(data), 0.0);
  const ModeResult mode = find_mode(*post.model, vec_t::Zero(5));
  REQUIRE(mode.converged);
  run(*post.model, fit_laplace(*post.model, mode.mode));
}

TEST_CASE("ltv_mc: zero tensor, analytic 1-D value, Cauchy-Schwarz bound") {
  CHECK(ltv_mc(WhitenedThird::zero(2), 1000, 1).value == 0.0);

  const double t = 0.8;
  CubicModel model(vec_t::Constant(1, t), 1.0);
  const LaplaceFit fit = fit_laplace(model, vec_t::Zero(1));
  const WhitenedThird tensor = whitened_third(model, fit);
  const LtvEstimate est = ltv_mc(tensor, 200000, 5);
  const double want = t * 2.0 * std::sqrt(2.0 / 3.14159265358979323846) / 12.0;
  CHECK(std::abs(est.value - want) <= 4.0 * est.std_error);

  // logistic d = 2, n = 20: value below eps_bar3 / 2 within MC noise
  LogRegDataset data = generate_data(20, 2, vec_t::Unit(2, 0), mat_t::Identity(2, 2), 15);
  const LogRegPosterior post = build_posterior(std::move(data), 0.0);
  const ModeResult mode = find_mode(*post.model, vec_t::Zero(2));
  REQUIRE(mode.converged);
  const LaplaceFit lfit = fit_laplace(*post.model, mode.mode);
  const SkewCorrection sc = make_skew_correction(*post.model, lfit);
  const LtvEstimate lest = ltv_mc(sc.tensor, 100000, 8);
  CHECK(lest.value <= sc.eps_bar3 / 2.0 + 4.0 * lest.std_error);
}

TEST_CASE("ltv_mc is deterministic per seed and invariant to representation") {
  LogRegDataset data = generate_data(50, 3, vec_t::Unit(3, 0), mat_t::Identity(3, 3), 2);
  const LogRegPosterior post = build_posterior(std::move(data), 0.1);
  const ModeResult mode = find_mode(*post.model, vec_t::Zero(3));
  const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
  const WhitenedThird lr = whitened_third(*post.model, fit, ThirdMode::low_rank);
  const LtvEstimate a = ltv_mc(lr, 40000, 9);
  const LtvEstimate b = ltv_mc(lr, 40000, 9);
  CHECK(a.value == b.value);
  const LtvEstimate c = ltv_mc(lr.densified(), 40000, 9);
  CHECK(std::abs(a.value - c.value) <= 1e-10 * std::max(1.0, a.value));
}

TEST_CASE("weighted_opnorm: quadratic is zero; multinomial c3 closed forms") {
  SUBCASE("quadratic") {
    Rng rng(3);
    QuadraticModel model(vec_t::Zero(3), testutil::random_spd(3, rng));
    const LaplaceFit fit = fit_laplace(model, vec_t::Zero(3));
    const OpnormEstimate est = weighted_opnorm(model, fit, 3, 0.0, 5, 1);
    CHECK(est.estimate == 0.0);
    CHECK(est.converged);
  }
  SUBCASE("p = (2/3, 1/3): c3 = sqrt(2)") {
    Eigen::VectorXi counts(2);
    counts << 60, 30;
    const MultinomialPosterior mp = make_multinomial(counts);
    const LaplaceFit fit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(1)));
    const OpnormEstimate est = weighted_opnorm(*mp.model, fit, 3, 0.0, 10, 7);
    CHECK(est.estimate == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    CHECK(est.converged);
  }
  SUBCASE("uniform p, d = 1: zero by symmetry") {
    Eigen::VectorXi counts(2);
    counts << 45, 45;
    const MultinomialPosterior mp = make_multinomial(counts);
    const LaplaceFit fit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(1)));
    const OpnormEstimate est = weighted_opnorm(*mp.model, fit, 3, 0.0, 10, 7);
    CHECK(est.estimate <= 1e-10);
  }
  SUBCASE("bad arguments") {
    Rng rng(3);
    QuadraticModel model(vec_t::Zero(2), testutil::random_spd(2, rng));
    const LaplaceFit fit = fit_laplace(model, vec_t::Zero(2));
    CHECK_THROWS_AS(weighted_opnorm(model, fit, 2, 0.0, 5, 1), ArgumentError);
    CHECK_THROWS_AS(weighted_opnorm(model, fit, 6, 0.0, 5, 1), ArgumentError);
  }
}

TEST_CASE("weighted_opnorm vs an exhaustive angular grid, d = 2") {
  Eigen::VectorXi counts(3);
  counts << 50, 30, 20;
  const MultinomialPosterior mp = make_multinomial(counts);
  const LaplaceFit fit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(2)));
  const OpnormEstimate ascent = weighted_opnorm(*mp.model, fit, 3, 0.0, 20, 13);

  const mat_t cols =
      fit.factor.transpose().triangularView<Eigen::Upper>().solve(mat_t::Identity(2, 2));
  double grid = 0.0;
  const int m = 10000;
  for (int i = 0; i < m; ++i) {
    const double ang = 2.0 * 3.14159265358979323846 * i / m;
    vec_t u(2);
    u << std::cos(ang), std::sin(ang);
    grid = std::max(grid,
                    std::abs(mp.model->third_dir(fit.mode, cols * u, cols * u, cols * u)));
  }
  grid *= std::sqrt(static_cast<double>(mp.n));  // v-scale, matching c_3
  CHECK(grid <= ascent.estimate * 1.0001);
  CHECK(grid >= ascent.estimate / 1.01);
}

TEST_CASE("select_radius: floor formula, degenerate case, violated floor") {
  const auto zero4 = [](double) { return 0.0; };
  SUBCASE("floor value for c0 = 1, s0 = 4") {
    const RadiusSelection sel = select_radius(1.0, 4.0, 0.01, zero4);
    CHECK(sel.radius_floor == doctest::Approx(13.545177444).epsilon(1e-8));
    CHECK(sel.radius >= sel.radius_floor);
  }
  SUBCASE("eps3 = eps4 = 0: upper limit, flagged") {
    const RadiusSelection sel = select_radius(1.0, 4.0, 0.0, zero4);
    CHECK(sel.radius == 1e6);
    CHECK(sel.degenerate_gaussian);
  }
  SUBCASE("eps3 = eps4 = 0.05: the unit bound fails already at the floor") {
    const RadiusSelection sel = select_radius(1.0, 4.0, 0.05, [](double) { return 0.05; });
    CHECK(sel.radius == doctest::Approx(13.545177444).epsilon(1e-8));
    CHECK(sel.floor_violates_unit_bound);
    // the feasible radius would have been (1/0.005)^{1/4} ~ 3.76 < s*
    CHECK(std::pow(1.0 / 0.005, 0.25) < sel.radius_floor);
  }
  SUBCASE("interior bisection solves (eps3^2 + eps4^2) s^4 = 1") {
    const double e3 = 0.004;
    const RadiusSelection sel = select_radius(1.0, 4.0, e3, zero4);
    CHECK(sel.radius == doctest::Approx(std::pow(1.0 / (e3 * e3), 0.25)).epsilon(1e-6));
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(select_radius(0.0, 4.0, 0.1, zero4), ArgumentError);
    CHECK_THROWS_AS(select_radius(1.5, 4.0, 0.1, zero4), ArgumentError);
  }
}

TEST_CASE("check_growth_condition arithmetic") {
  CHECK(check_growth_condition(0.0, 0.0, 3, 100.0));
  CHECK(check_growth_condition(1.0, 100.0, 4, 1e4));
  CHECK_FALSE(check_growth_condition(1.0, 1000.0, 4, 1e4));
  CHECK_FALSE(check_growth_condition(10.0, 0.0, 100, 1e4));
}

TEST_CASE("Hermite identity: E[<T,H3(Z)>^2] = 6 |T|_F^2 within 4 SE") {
  Rng trng(64);
  for (int rep = 0; rep < 3; ++rep) {
    const index_t d = 2 + 2 * rep;  // 2, 4, 6
    const WhitenedThird t = testutil::random_symmetric_tensor(d, trng);
    const double want = 6.0 * t.frobenius_sq();
    Rng rng(100 + rep);
    const index_t count = 60000;
    double sum = 0.0, sumsq = 0.0;
    for (index_t i = 0; i < count; ++i) {
      const double h = testutil::hermite3_contract(t, rng.normal_vec(d));
      sum += h * h;
      sumsq += h * h * h * h;
    }
    const double mean = sum / count;
    const double se = std::sqrt(std::max(0.0, sumsq / count - mean * mean) / count);
    CHECK(std::abs(mean - want) <= 4.0 * se);
  }
}

TEST_CASE("assemble_report: Gaussian target collapses to the tail term") {
  Rng rng(5);
  QuadraticModel model(vec_t::Zero(3), testutil::random_spd(3, rng), 50.0);
  const LaplaceFit fit = fit_laplace(model, vec_t::Zero(3));
  const SkewCorrection sc = make_skew_correction(model, fit);
  DiagnosticsOptions opts;
  opts.mc_count = 5000;
  opts.restarts = 4;
  const DiagnosticsReport rep = assemble_report(model, fit, sc, opts);
  CHECK(rep.eps_bar3 == 0.0);
  CHECK(rep.eps3 <= 1e-12);
  REQUIRE(rep.eps4.has_value());
  CHECK(*rep.eps4 <= 1e-12);
  CHECK(rep.E_s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.bounds.tv_corrected == doctest::Approx(rep.tau_s).epsilon(1e-9));
  CHECK(rep.ltv_estimate.value == 0.0);
}

TEST_CASE("assemble_report: multinomial closed forms and logistic consistency") {
  SUBCASE("multinomial n = 1e4") {
    Eigen::VectorXi counts(4);
    counts << 4000, 3000, 2000, 1000;
    const MultinomialPosterior mp = make_multinomial(counts);
    const MultinomialExact ex = exact_quantities(mp);
    const LaplaceFit fit = fit_laplace(*mp.model, vec_t(mp.freqs.tail(3)));
    const SkewCorrection sc = make_skew_correction(*mp.model, fit);
    DiagnosticsOptions opts;
    opts.mc_count = 20000;
    opts.restarts = 20;
    const DiagnosticsReport rep = assemble_report(*mp.model, fit, sc, opts);
    CHECK(rep.eps_bar3 == doctest::Approx(ex.eps_bar3_exact).epsilon(1e-10));
    CHECK(rep.eps3 == doctest::Approx(ex.eps3_exact).epsilon(0.01));
    CHECK(rep.ltv_estimate.value <= rep.eps_bar3 / 2.0 + 4.0 * rep.ltv_estimate.std_error);
    CHECK(rep.radius >= rep.radius_floor);
  }
  SUBCASE("logistic d = 2, n = 40: finite report, L_TV below eps_bar3/2") {
    LogRegDataset data = generate_data(40, 2, vec_t::Unit(2, 0), mat_t::Identity(2, 2), 19);
    const LogRegPosterior post = build_posterior(std::move(data), 0.0);
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(2));
    REQUIRE(mode.converged);
    const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    const SkewCorrection sc = make_skew_correction(*post.model, fit, ThirdMode::low_rank);
    DiagnosticsOptions opts;
    opts.mc_count = 20000;
    opts.restarts = 6;
    const DiagnosticsReport rep = assemble_report(*post.model, fit, sc, opts);
    CHECK(std::isfinite(rep.eps3));
    REQUIRE(rep.eps4.has_value());
    CHECK(std::isfinite(*rep.eps4));
    REQUIRE(rep.eps5.has_value());
    CHECK(std::isfinite(*rep.eps5));
    CHECK(rep.ltv_estimate.value <= rep.eps_bar3 / 2.0 + 4.0 * rep.ltv_estimate.std_error);
    REQUIRE(rep.bounds.mean_remainder_c5.has_value());
    // at n = 40 the unit-bound condition already fails at s*, so E(s*) and the
    // assembled remainder bounds are legitimately vacuous; the flag records it
    if (!rep.radius_floor_violates_unit_bound) {
      CHECK(std::isfinite(rep.bounds.tv_corrected));
      CHECK(std::isfinite(*rep.bounds.mean_remainder_c5));
    } else {
      CHECK(rep.bounds.tv_corrected > 0.0);
      CHECK(*rep.bounds.mean_remainder_c5 > 0.0);
    }
    // JSON payload carries the exact field names
    const std::string json = rep.to_json();
    for (const char* key :
         {"eps_bar3", "eps3", "eps4", "eps5", "radius", "radius_floor", "E_s", "tau_s",
          "ltv_estimate", "growth_coeff", "tv_corrected", "tv_leading", "mean_remainder",
          "mean_remainder_c5", "cov"})
      CHECK(json.find(key) != std::string::npos);
  }
}

TEST_CASE("assemble_report degrades gracefully without higher derivatives") {
  // population model exposes up to the fourth derivative only
  const PopulationLogistic pop = make_population_logistic(2, 400.0);
  const ModeResult mode = find_mode(*pop.model, vec_t::Unit(2, 0));
  REQUIRE(mode.converged);
  const LaplaceFit fit = fit_laplace(*pop.model, mode.mode);
  const SkewCorrection sc = make_skew_correction(*pop.model, fit);
  DiagnosticsOptions opts;
  opts.mc_count = 5000;
  opts.restarts = 4;
  const DiagnosticsReport rep = assemble_report(*pop.model, fit, sc, opts);
  CHECK(rep.eps4.has_value());
  CHECK_FALSE(rep.eps5.has_value());
  CHECK_FALSE(rep.bounds.mean_remainder_c5.has_value());
}
