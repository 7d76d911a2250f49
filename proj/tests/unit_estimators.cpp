#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "estimators.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace pnest;

namespace {

// exact-fit continuous fixture: y = 1 + 2x on every trial row
PartialNestDataset exact_linear_dataset() {
  auto row = [](double x, int p, int s, int a) {
    Observation o;
    o.x = {x};
    o.p = p;
    o.s = s;
    if (s == 1) {
      o.a = a;
      o.y = 1.0 + 2.0 * x;
    }
    return o;
  };
  std::vector<Observation> rows{
      row(0, 0, 0, -1), row(1, 1, 1, 0), row(2, 0, 1, 1), row(3, 0, 1, 0),
      row(0, 0, 1, 1),  row(1, 0, 1, 0), row(2, 1, 1, 1), row(4, 0, 0, -1),
  };
  return PartialNestDataset::from_rows(rows, {"x1"}, OutcomeKind::continuous);
}

}  // namespace

TEST_CASE("saturated fits make the three transported estimators coincide") {
  PartialNestDataset d = fixtures::saturated_dataset();
  NuisanceSet nuis = fit_nuisances(d);
  CHECK(nuis.all_converged());

  PointEstimates g = point_estimates(d, nuis, EstimatorKind::g_formula);
  PointEstimates w = point_estimates(d, nuis, EstimatorKind::weighting);
  PointEstimates aug = point_estimates(d, nuis, EstimatorKind::augmented);

  // brute-force standardization over covariate strata
  oracle::StratifiedMeans ref = oracle::stratified_standardization(
      d.covariates(), d.p(), d.s(), d.a(), d.y());
  const double expected = 29.0 / 48.0;
  CHECK(ref.psi0 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ref.psi1 == doctest::Approx(expected).epsilon(1e-12));

  for (const PointEstimates* e : {&g, &w, &aug}) {
    CHECK(e->psi0 == doctest::Approx(ref.psi0).epsilon(1e-10));
    CHECK(e->psi1 == doctest::Approx(ref.psi1).epsilon(1e-10));
    CHECK(e->ate == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  }

  // the trial-only estimator standardizes to the trial covariate
  // distribution instead and lands elsewhere on this fixture
  PointEstimates t = point_estimates(d, nuis, EstimatorKind::trial_only);
  CHECK(std::abs(t.psi0 - ref.psi0) > 1e-3);
}

TEST_CASE("zero outcome residuals collapse augmented onto g-formula") {
  PartialNestDataset d = exact_linear_dataset();
  NuisanceSet nuis = fit_nuisances(d);
  PointEstimates g = point_estimates(d, nuis, EstimatorKind::g_formula);
  PointEstimates aug = point_estimates(d, nuis, EstimatorKind::augmented);
  CHECK(aug.psi0 == doctest::Approx(g.psi0).epsilon(1e-10));
  CHECK(aug.psi1 == doctest::Approx(g.psi1).epsilon(1e-10));
  CHECK(aug.ate == doctest::Approx(g.ate).scale(1.0).epsilon(1e-10));
}

TEST_CASE("zero outcome predictions collapse augmented onto weighting") {
  PartialNestDataset d = exact_linear_dataset();
  NuisanceSet nuis = fit_nuisances(d);
  nuis.g0.setZero(d.n());
  nuis.g1.setZero(d.n());
  for (bool normalized : {false, true}) {
    EstimationOptions opts;
    opts.normalized_weights = normalized;
    PointEstimates w = point_estimates(d, nuis, EstimatorKind::weighting, opts);
    PointEstimates aug = point_estimates(d, nuis, EstimatorKind::augmented, opts);
    CHECK(aug.psi0 == doctest::Approx(w.psi0).epsilon(1e-12));
    CHECK(aug.psi1 == doctest::Approx(w.psi1).epsilon(1e-12));
  }
}

TEST_CASE("outcome location shifts move the standardizing estimators exactly") {
  PartialNestDataset d =
      fixtures::simulated_dataset(7, OutcomeKind::continuous);
  const double c = 100.0;
  std::vector<Observation> shifted = d.rows();
  for (auto& o : shifted)
    if (o.y.has_value()) *o.y += c;
  PartialNestDataset ds = PartialNestDataset::from_rows(
      shifted, d.covariate_names(), OutcomeKind::continuous);

  NuisanceSet n0 = fit_nuisances(d);
  NuisanceSet n1 = fit_nuisances(ds);

  PointEstimates g0 = point_estimates(d, n0, EstimatorKind::g_formula);
  PointEstimates g1 = point_estimates(ds, n1, EstimatorKind::g_formula);
  CHECK(g1.psi0 == doctest::Approx(g0.psi0 + c).epsilon(1e-9));
  CHECK(g1.psi1 == doctest::Approx(g0.psi1 + c).epsilon(1e-9));
  CHECK(g1.ate == doctest::Approx(g0.ate).scale(1.0).epsilon(1e-8));

  PointEstimates a0 = point_estimates(d, n0, EstimatorKind::augmented);
  PointEstimates a1 = point_estimates(ds, n1, EstimatorKind::augmented);
  CHECK(a1.psi0 == doctest::Approx(a0.psi0 + c).epsilon(1e-9));
  CHECK(a1.psi1 == doctest::Approx(a0.psi1 + c).epsilon(1e-9));

  EstimationOptions norm;
  norm.normalized_weights = true;
  PointEstimates w0 = point_estimates(d, n0, EstimatorKind::weighting, norm);
  PointEstimates w1 = point_estimates(ds, n1, EstimatorKind::weighting, norm);
  CHECK(w1.psi0 == doctest::Approx(w0.psi0 + c).epsilon(1e-9));
  CHECK(w1.psi1 == doctest::Approx(w0.psi1 + c).epsilon(1e-9));

  // the unnormalized weighted sum shifts by c times the weight-sum ratio,
  // which is not exactly one on a finite draw
  PointEstimates u0 = point_estimates(d, n0, EstimatorKind::weighting);
  PointEstimates u1 = point_estimates(ds, n1, EstimatorKind::weighting);
  CHECK(std::abs(u1.psi0 - (u0.psi0 + c)) > 1e-6);
}

TEST_CASE("row order does not change point estimates") {
  PartialNestDataset d = fixtures::simulated_dataset(19);
  std::vector<Observation> rows = d.rows();
  std::reverse(rows.begin(), rows.end());
  PartialNestDataset rev = PartialNestDataset::from_rows(
      rows, d.covariate_names(), d.outcome_kind());
  NuisanceSet na = fit_nuisances(d);
  NuisanceSet nb = fit_nuisances(rev);
  for (EstimatorKind k :
       {EstimatorKind::trial_only, EstimatorKind::g_formula,
        EstimatorKind::weighting, EstimatorKind::augmented}) {
    PointEstimates ea = point_estimates(d, na, k);
    PointEstimates eb = point_estimates(rev, nb, k);
    CHECK(ea.psi0 == doctest::Approx(eb.psi0).epsilon(1e-9));
    CHECK(ea.psi1 == doctest::Approx(eb.psi1).epsilon(1e-9));
    CHECK(ea.ate == doctest::Approx(eb.ate).scale(1.0).epsilon(1e-9));
  }
}

TEST_CASE("weights are the plug-in ratio and vanish off the arm") {
  PartialNestDataset d = fixtures::saturated_dataset();
  NuisanceSet nuis = fit_nuisances(d);
  nuis.phat.setConstant(d.n(), 0.4);
  nuis.qhat.setConstant(d.n(), 0.4);
  nuis.ehat.setConstant(d.n(), 0.5);
  for (int arm : {0, 1}) {
    Eigen::VectorXd w = compute_weights(d, nuis, arm);
    for (int i = 0; i < d.n(); ++i) {
      const Observation& o = d.rows()[i];
      if (o.s == 1 && o.a == arm) {
        CHECK(w(i) == 2.0);
      } else {
        CHECK(w(i) == 0.0);
      }
    }
  }
}

TEST_CASE("positivity floors stop degenerate weights") {
  PartialNestDataset d = fixtures::saturated_dataset();
  NuisanceSet base = fit_nuisances(d);

  NuisanceSet low_p = base;
  low_p.phat(1) = 1e-9;  // a trial row
  try {
    compute_weights(d, low_p, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PositivityViolation);
  }

  NuisanceSet low_e = base;
  low_e.ehat(1) = 1.0 - 1e-9;  // row 1 is in arm 0, so e_arm is tiny
  try {
    compute_weights(d, low_e, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PositivityViolation);
  }
}

TEST_CASE("known randomization probability replaces the treatment model") {
  PartialNestDataset d = fixtures::saturated_dataset();
  NuisanceSpec spec;
  spec.known_treat_prob = 0.5;
  NuisanceSet nuis = fit_nuisances(d, spec);
  CHECK_FALSE(nuis.treatment.has_value());
  CHECK(nuis.known_treat_prob.has_value());
  CHECK((nuis.ehat.array() == 0.5).all());
  // estimates still coincide on the saturated fixture because the fitted
  // treatment model lands on 1/2 in every stratum anyway
  NuisanceSet fitted = fit_nuisances(d);
  PointEstimates a = point_estimates(d, nuis, EstimatorKind::weighting);
  PointEstimates b = point_estimates(d, fitted, EstimatorKind::weighting);
  CHECK(a.psi0 == doctest::Approx(b.psi0).epsilon(1e-8));
  CHECK(a.psi1 == doctest::Approx(b.psi1).epsilon(1e-8));
}

TEST_CASE("the part model degenerates to one when no second part exists") {
  std::vector<Observation> rows;
  for (const auto& o : fixtures::saturated_rows())
    if (o.p == 0) rows.push_back(o);
  PartialNestDataset d =
      PartialNestDataset::from_rows(rows, {"x1"}, OutcomeKind::binary);
  CHECK(d.n1() == 0);
  NuisanceSet nuis = fit_nuisances(d);
  CHECK_FALSE(nuis.part.has_value());
  CHECK((nuis.qhat.array() == 1.0).all());

  // the explicit flag forces the same degeneracy on two-part data
  NuisanceSpec spec;
  spec.force_unit_part = true;
  NuisanceSet forced = fit_nuisances(fixtures::saturated_dataset(), spec);
  CHECK_FALSE(forced.part.has_value());
  CHECK((forced.qhat.array() == 1.0).all());
}

TEST_CASE("intercept-only weight models give exact diagnostic ratios") {
  PartialNestDataset d = fixtures::saturated_dataset();

  NuisanceSpec both;
  both.participation_cols = std::vector<int>{};
  both.part_cols = std::vector<int>{};
  WeightDiagnostics flat = weight_diagnostic(d, fit_nuisances(d, both));
  CHECK(flat.weight_sum_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(flat.ratio_flag);

  NuisanceSpec unit;
  unit.participation_cols = std::vector<int>{};
  unit.force_unit_part = true;
  WeightDiagnostics blind = weight_diagnostic(d, fit_nuisances(d, unit));
  CHECK(blind.weight_sum_ratio ==
        doctest::Approx(static_cast<double>(d.n()) / d.n0()).epsilon(1e-12));
  CHECK(blind.ratio_flag);
}

TEST_CASE("diagnostics on a realistic draw are coherent") {
  PartialNestDataset d = fixtures::simulated_dataset(3);
  NuisanceSet nuis = fit_nuisances(d);
  WeightDiagnostics diag = weight_diagnostic(d, nuis);
  CHECK(diag.weight_sum_ratio > 0.5);
  CHECK(diag.weight_sum_ratio < 2.0);
  CHECK(diag.min_participation_prob > 0.0);
  for (int i = 1; i < 5; ++i) {
    CHECK(diag.participation_percentiles[i] >=
          diag.participation_percentiles[i - 1]);
  }
  REQUIRE(diag.part_exchangeability.has_value());
  CHECK(diag.part_exchangeability->statistic >= 0.0);
  CHECK(diag.part_exchangeability->p_value > 0.0);
  CHECK(diag.part_exchangeability->p_value <= 1.0);
}

TEST_CASE("exchangeability test requires trial rows in both parts") {
  std::vector<Observation> rows;
  for (const auto& o : fixtures::saturated_rows())
    if (o.p == 0) rows.push_back(o);
  PartialNestDataset nested_only =
      PartialNestDataset::from_rows(rows, {"x1"}, OutcomeKind::binary);
  try {
    part_exchangeability_test(nested_only);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OnePartOnly);
  }

  // one arm confined to a single part also blocks the per-arm refit
  auto arm_rows = fixtures::saturated_rows();
  arm_rows[3].a = 0;
  arm_rows[3].y = 1.0;
  arm_rows[9].a = 0;
  arm_rows[9].y = 1.0;
  PartialNestDataset skewed =
      PartialNestDataset::from_rows(arm_rows, {"x1"}, OutcomeKind::binary);
  try {
    part_exchangeability_test(skewed);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OnePartOnly);
  }
}

TEST_CASE("exchangeability test holds its size and detects part shifts") {
  Scenario sc = Scenario::make(ScenarioLabel::no_em, OutcomeKind::continuous);
  const int sims = 400;
  int reject_null = 0, reject_shift = 0, used = 0;
  for (int r = 0; r < sims; ++r) {
    std::mt19937_64 gen = make_stream(77, r, 5);
    FullCohort cohort = generate_full_cohort(sc, gen);
    PartialNestDataset d = induce_partial_nesting(cohort);
    ExchangeabilityResult null_res;
    try {
      null_res = part_exchangeability_test(d);
    } catch (const Error&) {
      continue;  // a draw without both arms in both parts
    }
    ++used;
    if (null_res.p_value < 0.05) ++reject_null;

    std::vector<Observation> rows = d.rows();
    for (auto& o : rows)
      if (o.y.has_value() && o.p == 1) *o.y += 1.5;
    PartialNestDataset shifted = PartialNestDataset::from_rows(
        rows, d.covariate_names(), OutcomeKind::continuous);
    if (part_exchangeability_test(shifted).p_value < 0.05) ++reject_shift;
  }
  REQUIRE(used > 350);
  const double size = static_cast<double>(reject_null) / used;
  const double power = static_cast<double>(reject_shift) / used;
  CHECK(size > 0.01);
  CHECK(size < 0.11);
  CHECK(power > 0.9);
}

TEST_CASE("nuisance failures name the model that broke") {
  auto rows = fixtures::saturated_rows();
  for (auto& o : rows)
    if (o.a.has_value() && *o.a == 1) o.y = 1.0;  // arm 1 becomes one-class
  PartialNestDataset d =
      PartialNestDataset::from_rows(rows, {"x1"}, OutcomeKind::binary);
  try {
    fit_nuisances(d);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OneClassResponse);
    CHECK(std::string(e.what()).find("outcome model (arm 1)") !=
          std::string::npos);
  }
}
