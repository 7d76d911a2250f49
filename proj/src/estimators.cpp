#include "estimators.hpp"

#include <algorithm>
#include <cmath>

#include "mathutil.hpp"

namespace pnest {

namespace {

Eigen::MatrixXd full_design(const PartialNestDataset& data,
                            const std::optional<std::vector<int>>& cols) {
  const std::vector<int>* sel = cols ? &*cols : nullptr;
  return design_matrix(data, [](const Observation&) { return true; }, sel).F;
}

FittedModel fit_annotated(const char* which, ModelKind kind, const Eigen::MatrixXd& F,
                          const Eigen::VectorXd& y) {
  try {
    return kind == ModelKind::logistic ? fit_logistic(F, y, which) : fit_linear(F, y, which);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(which) + ": " + e.detail());
  }
}

}  // namespace

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::trial_only: return "trial_only";
    case EstimatorKind::g_formula: return "g_formula";
    case EstimatorKind::weighting: return "weighting";
    case EstimatorKind::augmented: return "augmented";
  }
  return "?";
}

bool NuisanceSet::all_converged() const {
  if (!outcome0.converged || !outcome1.converged || !participation.converged) return false;
  if (part && !part->converged) return false;
  if (treatment && !treatment->converged) return false;
  return true;
}

NuisanceSet fit_nuisances(const PartialNestDataset& data, const NuisanceSpec& spec) {
  NuisanceSet nuis;
  nuis.spec = spec;
  const int n = data.n();
  const ModelKind outcome_model_kind =
      data.outcome_kind() == OutcomeKind::binary ? ModelKind::logistic : ModelKind::linear;

  const std::vector<int>* ocols = spec.outcome_cols ? &*spec.outcome_cols : nullptr;
  for (int arm = 0; arm < 2; ++arm) {
    const DesignMatrix dm = design_matrix(
        data, [arm](const Observation& o) { return o.s == 1 && o.a && *o.a == arm; }, ocols);
    Eigen::VectorXd y(dm.F.rows());
    for (size_t r = 0; r < dm.row_indices.size(); ++r)
      y(static_cast<int>(r)) = data.y()(dm.row_indices[r]);
    const char* which = arm == 0 ? "outcome model (arm 0)" : "outcome model (arm 1)";
    FittedModel fit = fit_annotated(which, outcome_model_kind, dm.F, y);
    (arm == 0 ? nuis.outcome0 : nuis.outcome1) = fit;
  }

  {
    const Eigen::MatrixXd F = full_design(data, spec.participation_cols);
    nuis.participation =
        fit_annotated("participation model", ModelKind::logistic, F, data.s().cast<double>());
    nuis.phat = predict(nuis.participation, F);
  }

  nuis.qhat = Eigen::VectorXd::Ones(n);
  if (!spec.force_unit_part) {
    const Eigen::MatrixXd F = full_design(data, spec.part_cols);
    const Eigen::VectorXd resp =
        (data.p().array() == 0).cast<double>().matrix();
    if (data.n1() == 0) {
      // fully nested degenerate case: the response is identically 1
      // and q is taken as 1 everywhere
    } else {
      nuis.part = fit_annotated("part model", ModelKind::logistic, F, resp);
      nuis.qhat = predict(*nuis.part, F);
    }
  }

  if (spec.known_treat_prob) {
    nuis.known_treat_prob = spec.known_treat_prob;
    nuis.ehat = Eigen::VectorXd::Constant(n, *spec.known_treat_prob);
  } else {
    const std::vector<int>* tcols = spec.treatment_cols ? &*spec.treatment_cols : nullptr;
    const DesignMatrix dm =
        design_matrix(data, [](const Observation& o) { return o.s == 1; }, tcols);
    Eigen::VectorXd resp(dm.F.rows());
    for (size_t r = 0; r < dm.row_indices.size(); ++r)
      resp(static_cast<int>(r)) = data.a()(dm.row_indices[r]);
    nuis.treatment = fit_annotated("treatment model", ModelKind::logistic, dm.F, resp);
    const Eigen::MatrixXd Fall = full_design(data, spec.treatment_cols);
    nuis.ehat = predict(*nuis.treatment, Fall);
  }

  {
    const Eigen::MatrixXd F = full_design(data, spec.outcome_cols);
    nuis.g0 = predict(nuis.outcome0, F);
    nuis.g1 = predict(nuis.outcome1, F);
  }
  return nuis;
}

double estimate_g_formula(const PartialNestDataset& data, const NuisanceSet& nuis, int arm) {
  if (data.n0() == 0) throw Error(ErrorCode::NoTargetRows, "no rows in the nested part (p=0)");
  const Eigen::VectorXd& g = arm == 1 ? nuis.g1 : nuis.g0;
  double sum = 0.0;
  for (int i = 0; i < data.n(); ++i)
    if (data.p()(i) == 0) sum += g(i);
  return sum / data.n0();
}

double estimate_trial_only(const PartialNestDataset& data, const NuisanceSet& nuis, int arm) {
  const Eigen::VectorXd& g = arm == 1 ? nuis.g1 : nuis.g0;
  double sum = 0.0;
  int cnt = 0;
  for (int i = 0; i < data.n(); ++i)
    if (data.s()(i) == 1) {
      sum += g(i);
      ++cnt;
    }
  if (cnt == 0) throw Error(ErrorCode::NoTrialRows, "no trial rows (s=1)");
  return sum / cnt;
}

Eigen::VectorXd compute_weights(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                                const EstimationOptions& opts) {
  const int n = data.n();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (data.s()(i) != 1) continue;
    if (nuis.phat(i) < opts.positivity_floor)
      throw Error(ErrorCode::PositivityViolation,
                  "row " + std::to_string(i + 1) + " has participation probability " +
                      std::to_string(nuis.phat(i)) + " below the floor");
    if (data.a()(i) != arm) continue;
    const double e_arm = arm == 1 ? nuis.ehat(i) : 1.0 - nuis.ehat(i);
    if (e_arm < opts.positivity_floor)
      throw Error(ErrorCode::PositivityViolation,
                  "row " + std::to_string(i + 1) + " has arm probability " +
                      std::to_string(e_arm) + " below the floor");
    w(i) = nuis.qhat(i) / (nuis.phat(i) * e_arm);
  }
  return w;
}

double estimate_weighting(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                          const EstimationOptions& opts) {
  if (data.n0() == 0) throw Error(ErrorCode::NoTargetRows, "no rows in the nested part (p=0)");
  const Eigen::VectorXd w = compute_weights(data, nuis, arm, opts);
  double num = 0.0, wsum = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (w(i) == 0.0) continue;
    num += w(i) * data.y()(i);
    wsum += w(i);
  }
  return opts.normalized_weights ? num / wsum : num / data.n0();
}

double estimate_augmented(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                          const EstimationOptions& opts) {
  if (data.n0() == 0) throw Error(ErrorCode::NoTargetRows, "no rows in the nested part (p=0)");
  const Eigen::VectorXd w = compute_weights(data, nuis, arm, opts);
  const Eigen::VectorXd& g = arm == 1 ? nuis.g1 : nuis.g0;
  double resid = 0.0, wsum = 0.0, gsum = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (w(i) != 0.0) {
      resid += w(i) * (data.y()(i) - g(i));
      wsum += w(i);
    }
    if (data.p()(i) == 0) gsum += g(i);
  }
  if (opts.normalized_weights) return gsum / data.n0() + resid / wsum;
  return (gsum + resid) / data.n0();
}

PointEstimates point_estimates(const PartialNestDataset& data, const NuisanceSet& nuis,
                               EstimatorKind kind, const EstimationOptions& opts) {
  auto one = [&](int arm) {
    switch (kind) {
      case EstimatorKind::trial_only: return estimate_trial_only(data, nuis, arm);
      case EstimatorKind::g_formula: return estimate_g_formula(data, nuis, arm);
      case EstimatorKind::weighting: return estimate_weighting(data, nuis, arm, opts);
      case EstimatorKind::augmented: return estimate_augmented(data, nuis, arm, opts);
    }
    return 0.0;
  };
  PointEstimates pe;
  pe.psi0 = one(0);
  pe.psi1 = one(1);
  pe.ate = pe.psi1 - pe.psi0;
  return pe;
}

ExchangeabilityResult part_exchangeability_test(const PartialNestDataset& data) {
  int s1p0 = 0, s1p1 = 0;
  for (int i = 0; i < data.n(); ++i)
    if (data.s()(i) == 1) (data.p()(i) == 0 ? s1p0 : s1p1)++;
  if (s1p0 == 0 || s1p1 == 0)
    throw Error(ErrorCode::OnePartOnly, "trial rows exist in only one part");

  double stat = 0.0;
  for (int arm = 0; arm < 2; ++arm) {
    const DesignMatrix dm = design_matrix(
        data, [arm](const Observation& o) { return o.s == 1 && o.a && *o.a == arm; }, nullptr);
    const int nr = static_cast<int>(dm.F.rows());
    const int k = static_cast<int>(dm.F.cols());
    Eigen::MatrixXd F(nr, k + 1);
    F.leftCols(k) = dm.F;
    Eigen::VectorXd y(nr);
    bool seen0 = false, seen1 = false;
    for (int r = 0; r < nr; ++r) {
      const int row = dm.row_indices[r];
      F(r, k) = data.p()(row);
      (data.p()(row) == 1 ? seen1 : seen0) = true;
      y(r) = data.y()(row);
    }
    if (!seen0 || !seen1)
      throw Error(ErrorCode::OnePartOnly,
                  "treatment arm " + std::to_string(arm) + " has trial rows in only one part");

    double coef_p, var_p;
    if (data.outcome_kind() == OutcomeKind::binary) {
      const FittedModel fit = fit_logistic(F, y, "exchangeability probe");
      const Eigen::MatrixXd info = logistic_information(F, fit.coef);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
      if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularInformation, "exchangeability probe: singular information");
      Eigen::VectorXd ek = Eigen::VectorXd::Zero(k + 1);
      ek(k) = 1.0;
      var_p = ldlt.solve(ek)(k);
      coef_p = fit.coef(k);
    } else {
      const FittedModel fit = fit_linear(F, y, "exchangeability probe");
      const Eigen::VectorXd resid = y - F * fit.coef;
      const double sigma2 = resid.squaredNorm() / (nr - (k + 1));
      Eigen::LDLT<Eigen::MatrixXd> ldlt(F.transpose() * F);
      Eigen::VectorXd ek = Eigen::VectorXd::Zero(k + 1);
      ek(k) = 1.0;
      var_p = sigma2 * ldlt.solve(ek)(k);
      coef_p = fit.coef(k);
    }
    if (!(var_p > 0))
      throw Error(ErrorCode::SingularInformation, "exchangeability probe: non-positive variance");
    const double z = coef_p / std::sqrt(var_p);
    stat += z * z;
  }
  return ExchangeabilityResult{stat, chi2_sf_2df(stat)};
}

WeightDiagnostics weight_diagnostic(const PartialNestDataset& data, const NuisanceSet& nuis) {
  if (data.n0() == 0) throw Error(ErrorCode::NoTargetRows, "no rows in the nested part (p=0)");
  WeightDiagnostics d;
  double lhs = 0.0;
  std::vector<double> p_target;
  p_target.reserve(data.n0());
  for (int i = 0; i < data.n(); ++i) {
    if (data.s()(i) == 1) lhs += nuis.qhat(i) / nuis.phat(i);
    if (data.p()(i) == 0) p_target.push_back(nuis.phat(i));
  }
  d.weight_sum_ratio = lhs / data.n0();
  d.ratio_flag = d.weight_sum_ratio < kRatioFlagLow || d.weight_sum_ratio > kRatioFlagHigh;

  d.min_participation_prob = *std::min_element(p_target.begin(), p_target.end());
  const double levels[5] = {0.01, 0.05, 0.50, 0.95, 0.99};
  for (int j = 0; j < 5; ++j) d.participation_percentiles[j] = quantile(p_target, levels[j]);
  d.positivity_flag = d.participation_percentiles[0] < kPositivityPercentileFloor;

  try {
    d.part_exchangeability = part_exchangeability_test(data);
  } catch (const Error&) {
    d.part_exchangeability = std::nullopt;
  }
  return d;
}

}  // namespace pnest
