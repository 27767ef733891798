#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

#include "skewlap/diagnostics.hpp"
#include "skewlap/errors.hpp"
#include "skewlap/logreg.hpp"
#include "skewlap/rng.hpp"
#include "skewlap/skew.hpp"

using namespace skewlap;

namespace {

double bisect_mode(const PosteriorModel& model, double lo, double hi) {
  auto g = [&](double b) {
    vec_t x(1);
    x << b;
    return model.gradient(x)[0];
  };
  REQUIRE(g(lo) < 0.0);
  REQUIRE(g(hi) > 0.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("stable psi chain matches the naive formulas and survives large t") {
  for (double t : {-35.0, -3.0, -0.5, 0.0, 0.7, 4.0, 35.0}) {
    CHECK(std::isfinite(psi(t)));
    if (std::abs(t) < 20.0) {
      const double s = 1.0 / (1.0 + std::exp(-t));
      CHECK(psi(t) == doctest::Approx(std::log(1.0 + std::exp(t))).epsilon(1e-12));
      CHECK(psi2(t) == doctest::Approx(s * (1 - s)).epsilon(1e-12));
      CHECK(psi3(t) == doctest::Approx(s * (1 - s) * (1 - 2 * s)).epsilon(1e-12));
      CHECK(psi4(t) == doctest::Approx(s * (1 - s) * (1 - 6 * s + 6 * s * s)).epsilon(1e-10));
      CHECK(psi5(t) ==
            doctest::Approx(s * (1 - s) * (1 - 2 * s) * (1 - 12 * s + 12 * s * s)).epsilon(1e-10));
    }
  }
  CHECK(psi(700.0) == 700.0);
  CHECK(psi(-700.0) < 1e-300);
}

TEST_CASE("generate_data: label balance at beta = 0, determinism, SPD check") {
  const index_t n = 4000;
  LogRegDataset data = generate_data(n, 2, vec_t::Zero(2), mat_t::Identity(2, 2), 5);
  const double mean = data.labels.mean();
  CHECK(std::abs(mean - 0.5) <= 4.0 * std::sqrt(0.25 / static_cast<double>(n)));

  LogRegDataset again = generate_data(n, 2, vec_t::Zero(2), mat_t::Identity(2, 2), 5);
  CHECK((data.features - again.features).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((data.labels - again.labels).lpNorm<Eigen::Infinity>() == 0.0);

  mat_t bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(generate_data(10, 2, vec_t::Zero(2), bad, 1), NotPositiveDefiniteError);
}

TEST_CASE("posterior Hessian is PSD everywhere") {
  LogRegDataset data = generate_data(30, 6, vec_t::Unit(6, 0), mat_t::Identity(6, 6), 8);
  const LogRegPosterior post = build_posterior(std::move(data), 0.0);
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const vec_t b = 2.0 * rng.normal_vec(6);
    Eigen::SelfAdjointEigenSolver<mat_t> es(post.model->hessian(b));
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("complete separation under a flat prior is detected, not fixed") {
  // all labels follow the sign of x: no finite MLE
  const index_t n = 12;
  mat_t X(n, 1);
  vec_t y(n);
  for (index_t i = 0; i < n; ++i) {
    X(i, 0) = (i < 6 ? 1.0 : -1.0) * (1.0 + 0.1 * static_cast<double>(i % 6));
    y[i] = i < 6 ? 1.0 : 0.0;
  }
  LogRegDataset data{X, y, mat_t::Identity(1, 1), std::nullopt};
  const LogRegPosterior post = build_posterior(std::move(data), 0.0);
  const ModeResult res = find_mode(*post.model, vec_t::Zero(1), 500);
  CHECK((!res.converged || res.diverged));
}

TEST_CASE("two symmetric points give mode zero; the label-flip variant is separated") {
  mat_t X(2, 1);
  X << 1.0, -1.0;
  {
    // matched labels: V(b) = psi(b) + psi(-b), even, so the mode sits at zero
    vec_t y(2);
    y << 1.0, 1.0;
    LogRegDataset data{X, y, mat_t::Identity(1, 1), std::nullopt};
    const LogRegPosterior post = build_posterior(std::move(data), 0.0);
    const double golden = bisect_mode(*post.model, -5.0, 5.0);
    CHECK(std::abs(golden) < 1e-12);
    const ModeResult res = find_mode(*post.model, vec_t::Constant(1, 0.7));
    CHECK(res.converged);
    CHECK(std::abs(res.mode[0]) < 1e-12);
  }
  {
    // labels following the sign of x: V'(b) = 2 sigma(b) - 2 < 0 everywhere,
    // no finite minimiser, so the escape must be flagged
    vec_t y(2);
    y << 1.0, 0.0;
    LogRegDataset data{X, y, mat_t::Identity(1, 1), std::nullopt};
    const LogRegPosterior post = build_posterior(std::move(data), 0.0);
    const ModeResult res = find_mode(*post.model, vec_t::Constant(1, 0.7), 500);
    CHECK((!res.converged || res.diverged));
  }
}

TEST_CASE("fast_skew agrees with the generic dense pipeline") {
  SUBCASE("single sample, d = 3") {
    mat_t X(1, 3);
    X << 0.4, -1.2, 0.7;
    vec_t y(1);
    y << 1.0;
    LogRegDataset data{X, y, mat_t::Identity(3, 3), std::nullopt};
    const LogRegPosterior post = build_posterior(std::move(data), 1.0);  // ridge keeps the MAP finite
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(3));
    REQUIRE(mode.converged);
    const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    const FastSkew fs = fast_skew(post, fit);
    const vec_t generic = mean_shift(*post.model, fit);
    CHECK((fs.delta_mode - generic).lpNorm<Eigen::Infinity>() <=
          1e-10 * std::max(1.0, generic.lpNorm<Eigen::Infinity>()));
    const SkewCorrection sc = make_skew_correction(*post.model, fit);  // dense tensor
    CHECK(fs.eps_bar3 == doctest::Approx(sc.eps_bar3).epsilon(1e-10));
  }
  SUBCASE("n = 80, d = 6") {
    LogRegDataset data = generate_data(80, 6, vec_t::Unit(6, 0), mat_t::Identity(6, 6), 23);
    const LogRegPosterior post = build_posterior(std::move(data), 0.0);
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(6));
    REQUIRE(mode.converged);
    const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    const FastSkew fs = fast_skew(post, fit);
    CHECK((fs.delta_mode - mean_shift(*post.model, fit)).norm() <= 1e-10);
    const WhitenedThird dense = whitened_third(*post.model, fit, ThirdMode::low_rank).densified();
    CHECK(fs.eps_bar3 == doctest::Approx(eps_bar3(dense)).epsilon(1e-8));
  }
}

TEST_CASE("mean shift is small against the marginal sd when beta = 0") {
  LogRegDataset data = generate_data(2000, 3, vec_t::Zero(3), mat_t::Identity(3, 3), 31);
  const LogRegPosterior post = build_posterior(std::move(data), 0.0);
  const ModeResult mode = find_mode(*post.model, vec_t::Zero(3));
  REQUIRE(mode.converged);
  const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
  const FastSkew fs = fast_skew(post, fit, false);
  const double max_sd = std::sqrt(fit.covariance().diagonal().maxCoeff());
  CHECK(fs.delta_mode.norm() <= 0.5 * max_sd);
}

TEST_CASE("reported eps3 estimate is non-increasing in the prior strength") {
  LogRegDataset data = generate_data(60, 3, vec_t::Unit(3, 0), mat_t::Identity(3, 3), 47);
  double prev = 1e300;
  for (const double kappa : {0.0, 1.0, 10.0, 100.0}) {
    const LogRegPosterior post = build_posterior(data, kappa);
    const ModeResult mode = find_mode(*post.model, vec_t::Zero(3));
    REQUIRE(mode.converged);
    const LaplaceFit fit = fit_laplace(*post.model, mode.mode);
    const OpnormEstimate c3 = weighted_opnorm(*post.model, fit, 3, 0.0, 12, 500);
    const double eps3 = c3.estimate * 3.0 / std::sqrt(static_cast<double>(post.model->n_scale()));
    CHECK(eps3 <= prev * (1.0 + 1e-9));
    prev = eps3;
  }
}

TEST_CASE("CSV round trip preserves the dataset bit for bit") {
  LogRegDataset data = generate_data(25, 3, vec_t::Unit(3, 0), mat_t::Identity(3, 3), 3);
  const std::string path = "logreg_roundtrip_test.csv";
  write_logreg_csv(path, data);
  const LogRegDataset back = read_logreg_csv(path);
  CHECK((data.features - back.features).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((data.labels - back.labels).lpNorm<Eigen::Infinity>() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("population logistic: moments, closed forms, generic pipeline match") {
  SUBCASE("a_{2,0}, a_{2,2} positive and stable under node doubling") {
    const PopulationLogistic pop200 = make_population_logistic(3, 100.0, 200);
    const PopulationLogistic pop400 = make_population_logistic(3, 100.0, 400);
    CHECK(pop200.a(2, 0) > 0.0);
    CHECK(pop200.a(2, 2) > 0.0);
    CHECK(std::abs(pop200.a(2, 0) - pop400.a(2, 0)) < 1e-10);
    CHECK(std::abs(pop200.a(2, 2) - pop400.a(2, 2)) < 1e-10);
    CHECK(std::abs(pop200.a(3, 1) - pop400.a(3, 1)) < 1e-10);
    CHECK(std::abs(pop200.a(3, 3) - pop400.a(3, 3)) < 1e-10);
  }
  SUBCASE("d = 1 delta norm reduces to |a33| / (2 a22^{3/2} sqrt(n))") {
    const PopulationLogistic pop = make_population_logistic(1, 50.0);
    const PopulationLeadingTerms lt = population_leading_terms(pop);
    const double want = std::abs(pop.a(3, 3)) / (2.0 * std::pow(pop.a(2, 2), 1.5) * std::sqrt(50.0));
    CHECK(lt.delta_norm == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("generic pipeline reproduces the closed-form delta norm, d = 5") {
    const PopulationLogistic pop = make_population_logistic(5, 1e4);
    const ModeResult mode = find_mode(*pop.model, vec_t(0.9 * vec_t::Unit(5, 0)));
    REQUIRE(mode.converged);
    CHECK((mode.mode - vec_t::Unit(5, 0)).norm() < 1e-7);
    const LaplaceFit fit = fit_laplace(*pop.model, mode.mode);
    const vec_t delta = mean_shift(*pop.model, fit);
    const double got = fit.hv_norm(delta);
    const PopulationLeadingTerms lt = population_leading_terms(pop);
    CHECK(got == doctest::Approx(lt.delta_norm).epsilon(0.01));
  }
  SUBCASE("population Hessian matches diag(a22, a20, ..., a20) at the mode") {
    const PopulationLogistic pop = make_population_logistic(4, 100.0);
    const mat_t H = pop.model->hessian(vec_t::Unit(4, 0)) / 100.0;
    CHECK(H(0, 0) == doctest::Approx(pop.a(2, 2)).epsilon(1e-10));
    CHECK(H(1, 1) == doctest::Approx(pop.a(2, 0)).epsilon(1e-10));
    CHECK(std::abs(H(0, 1)) < 1e-12);
  }
}
