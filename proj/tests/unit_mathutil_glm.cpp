#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "glm.hpp"
#include "mathutil.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace pnest;

TEST_CASE("expit basic values and stability") {
  CHECK(expit(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  // negative branch against the direct formula
  CHECK(expit(-0.471) ==
        doctest::Approx(1.0 / (1.0 + std::exp(0.471))).epsilon(1e-14));
  CHECK(expit(800.0) == 1.0);
  CHECK(expit(-800.0) == 0.0);
  CHECK(std::isfinite(expit(800.0)));
  for (double z : {-30.0, -3.0, -0.1, 0.7, 12.0}) {
    CHECK(expit(z) + expit(-z) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("log1pexp matches direct formula in the safe range") {
  for (double z = -25.0; z <= 25.0; z += 0.37) {
    CHECK(log1pexp(z) ==
          doctest::Approx(std::log1p(std::exp(z))).epsilon(1e-13));
  }
  CHECK(log1pexp(-700.0) == doctest::Approx(0.0).epsilon(1e-300));
  CHECK(log1pexp(700.0) == doctest::Approx(700.0).epsilon(1e-14));
  // continuity across the branch cutoffs
  for (double c : {-35.0, 35.0}) {
    CHECK(std::abs(log1pexp(c - 1e-9) - log1pexp(c + 1e-9)) < 1e-8);
  }
}

TEST_CASE("quantile follows the R type-7 convention") {
  std::vector<double> v{4.0, 2.0, 1.0, 3.0};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0).epsilon(1e-15));
  // input must not be reordered in place
  CHECK(v[0] == 4.0);
  std::vector<double> one{7.25};
  CHECK(quantile(one, 0.01) == 7.25);
  CHECK(quantile(one, 0.99) == 7.25);
}

TEST_CASE("two degree of freedom chi-square tail") {
  CHECK(chi2_sf_2df(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(chi2_sf_2df(2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(chi2_sf_2df(20.0) == doctest::Approx(std::exp(-10.0)).epsilon(1e-14));
}

TEST_CASE("two sided normal p-value") {
  CHECK(normal_two_sided_p(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(normal_two_sided_p(1.959963984540054) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(normal_two_sided_p(-1.959963984540054) ==
        doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("keyed streams are deterministic and separated") {
  std::mt19937_64 g1 = make_stream(42, 3, 7);
  std::mt19937_64 g2 = make_stream(42, 3, 7);
  std::mt19937_64 g3 = make_stream(42, 4, 7);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) {
    std::uint64_t a = g1();
    std::uint64_t b = g2();
    std::uint64_t c = g3();
    all_equal = all_equal && (a == b);
    any_diff = any_diff || (a != c);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("draw helpers have the right ranges and moments") {
  std::mt19937_64 gen = make_stream(9, 0, 0);
  const int n = 20000;
  double bern_sum = 0.0;
  double norm_sum = 0.0;
  double norm_sq = 0.0;
  bool idx_ok = true;
  for (int i = 0; i < n; ++i) {
    double u = u01(gen);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    bern_sum += draw_bernoulli(gen, 0.3);
    double z = draw_normal(gen);
    norm_sum += z;
    norm_sq += z * z;
    std::size_t k = draw_index(gen, 7);
    idx_ok = idx_ok && k < 7;
  }
  CHECK(idx_ok);
  CHECK(bern_sum / n == doctest::Approx(0.3).epsilon(0.05));
  CHECK(norm_sum / n == doctest::Approx(0.0).scale(1.0).epsilon(0.03));
  CHECK(norm_sq / n == doctest::Approx(1.0).epsilon(0.05));
}

namespace {

// small synthetic logistic problem drawn from the library's own stream
struct LogitProblem {
  Eigen::MatrixXd F;
  Eigen::VectorXd y;
};

LogitProblem make_logit_problem(int n, std::uint64_t seed) {
  std::mt19937_64 gen = make_stream(seed, 0, 1);
  LogitProblem pr;
  pr.F.resize(n, 4);
  pr.y.resize(n);
  for (int i = 0; i < n; ++i) {
    pr.F(i, 0) = 1.0;
    for (int j = 1; j < 4; ++j) pr.F(i, j) = draw_normal(gen);
    double eta = -0.471 + 0.5 * (pr.F(i, 1) + pr.F(i, 2) + pr.F(i, 3));
    pr.y(i) = draw_bernoulli(gen, expit(eta)) ? 1.0 : 0.0;
  }
  return pr;
}

}  // namespace

TEST_CASE("intercept-only logistic fit recovers the sample logit") {
  Eigen::MatrixXd F = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd y(8);
  y << 1, 0, 0, 0, 1, 0, 0, 0;
  FittedModel fit = fit_logistic(F, y);
  CHECK(fit.converged);
  CHECK(fit.coef(0) ==
        doctest::Approx(-1.0986122886681098).epsilon(1e-10));
}

TEST_CASE("logistic fit matches an independent Newton solver") {
  LogitProblem pr = make_logit_problem(200, 17);
  FittedModel fit = fit_logistic(pr.F, pr.y);
  Eigen::VectorXd ref = oracle::logistic_newton(pr.F, pr.y);
  CHECK(fit.converged);
  CHECK(fit.final_gradient_norm <= 1e-8);
  CHECK((fit.coef - ref).cwiseAbs().maxCoeff() < 1e-6);

  // the intercept score is zero at the optimum, so fitted and observed
  // means agree
  Eigen::VectorXd mu = predict(fit, pr.F);
  CHECK(mu.mean() == doctest::Approx(pr.y.mean()).epsilon(1e-10));

  // the tracked log-likelihood never decreases
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
    CHECK(fit.loglik_trace[i] >=
          fit.loglik_trace[i - 1] - 1e-9 * (1.0 + std::abs(fit.loglik_trace[i])));
  }
}

TEST_CASE("logistic predictions are invariant to affine predictor rescaling") {
  LogitProblem pr = make_logit_problem(150, 23);
  Eigen::MatrixXd F2 = pr.F;
  F2.col(1) = (pr.F.col(1).array() - 3.0) / 7.0;
  F2.col(2) = pr.F.col(2).array() * 40.0;
  FittedModel f1 = fit_logistic(pr.F, pr.y);
  FittedModel f2 = fit_logistic(F2, pr.y);
  Eigen::VectorXd mu1 = predict(f1, pr.F);
  Eigen::VectorXd mu2 = predict(f2, F2);
  CHECK((mu1 - mu2).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("separated logistic data is refused") {
  Eigen::MatrixXd F(10, 2);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    double x = i - 4.5;
    F(i, 0) = 1.0;
    F(i, 1) = x;
    y(i) = x > 0 ? 1.0 : 0.0;
  }
  try {
    fit_logistic(F, y);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SeparationDetected);
    CHECK(std::string(e.what()).find("separable") != std::string::npos);
  }
}

TEST_CASE("one-class logistic response is refused") {
  Eigen::MatrixXd F = Eigen::MatrixXd::Ones(6, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
  try {
    fit_logistic(F, y);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OneClassResponse);
  }
}

TEST_CASE("linear fit matches the normal-equation oracle") {
  std::mt19937_64 gen = make_stream(31, 0, 2);
  const int n = 120;
  Eigen::MatrixXd F(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    F(i, 0) = 1.0;
    F(i, 1) = draw_normal(gen);
    F(i, 2) = draw_normal(gen);
    y(i) = 1.0 + 2.0 * F(i, 1) - 0.5 * F(i, 2) + draw_normal(gen);
  }
  FittedModel fit = fit_linear(F, y);
  Eigen::VectorXd ref = oracle::ols_gram(F, y);
  CHECK(fit.converged);
  CHECK((fit.coef - ref).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((predict(fit, F) - F * fit.coef).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noiseless linear data is reproduced exactly") {
  Eigen::MatrixXd F(5, 2);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    F(i, 0) = 1.0;
    F(i, 1) = i;
    y(i) = 2.0 + 3.0 * i;
  }
  FittedModel fit = fit_linear(F, y);
  CHECK(fit.coef(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.coef(1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("rank-deficient linear designs are refused") {
  Eigen::MatrixXd F(6, 3);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    F(i, 0) = 1.0;
    F(i, 1) = i;
    F(i, 2) = 2.0 * i;  // exact copy of column 1 up to scale
    y(i) = i;
  }
  try {
    fit_linear(F, y);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
  // wide designs are refused before any decomposition
  Eigen::MatrixXd wide = Eigen::MatrixXd::Ones(2, 5);
  Eigen::VectorXd yw(2);
  yw << 0.0, 1.0;
  try {
    fit_linear(wide, yw);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
}

TEST_CASE("logistic information matrix equals the weighted Gram matrix") {
  LogitProblem pr = make_logit_problem(80, 41);
  FittedModel fit = fit_logistic(pr.F, pr.y);
  Eigen::VectorXd mu = predict(fit, pr.F);
  Eigen::MatrixXd direct =
      pr.F.transpose() * (mu.array() * (1.0 - mu.array())).matrix().asDiagonal() * pr.F;
  Eigen::MatrixXd info = logistic_information(pr.F, fit.coef);
  CHECK((info - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Gauss-Hermite oracle integrates exactly on low-degree polynomials") {
  oracle::GaussHermite gh = oracle::gauss_hermite(10);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < 10; ++i) {
    m0 += gh.weights(i);
    m2 += gh.weights(i) * gh.nodes(i) * gh.nodes(i);
    m4 += gh.weights(i) * std::pow(gh.nodes(i), 4);
  }
  const double rp = std::sqrt(M_PI);
  CHECK(m0 == doctest::Approx(rp).epsilon(1e-12));
  CHECK(m2 == doctest::Approx(rp / 2.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0 * rp / 4.0).epsilon(1e-12));
}

TEST_CASE("normal-logistic mean oracle agrees with brute-force integration") {
  Eigen::Vector3d slopes(1.0, 0.0, 0.5);
  double val = oracle::expit_normal_mean(0.5, slopes, 40);
  // crude deterministic check via a fine one-dimensional reduction: the
  // linear combination has mean 0.5 and variance 1.25, so reduce to one
  // Gauss-Hermite axis
  oracle::GaussHermite gh = oracle::gauss_hermite(60);
  double sd = std::sqrt(1.25);
  double acc = 0.0;
  for (int i = 0; i < 60; ++i) {
    acc += gh.weights(i) * expit(0.5 + sd * std::sqrt(2.0) * gh.nodes(i));
  }
  acc /= std::sqrt(M_PI);
  CHECK(val == doctest::Approx(acc).epsilon(1e-10));
}
