#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "glm.hpp"

namespace pnest {

// Column selections for each nuisance model: nullopt means all
// covariates, an empty list means intercept only. known_treat_prob
// replaces the fitted treatment model with the randomization constant.
// force_unit_part drops the part model entirely (q = 1), the nested
// design convention.
struct NuisanceSpec {
  std::optional<std::vector<int>> outcome_cols;
  std::optional<std::vector<int>> participation_cols;
  std::optional<std::vector<int>> part_cols;
  std::optional<std::vector<int>> treatment_cols;
  std::optional<double> known_treat_prob;
  bool force_unit_part = false;
};

struct NuisanceSet {
  FittedModel outcome0, outcome1;
  FittedModel participation;
  std::optional<FittedModel> part;       // absent when q is identically 1
  std::optional<FittedModel> treatment;  // absent when the constant is used
  std::optional<double> known_treat_prob;
  NuisanceSpec spec;
  // predictions on every dataset row
  Eigen::VectorXd g0, g1;  // per-arm outcome predictions
  Eigen::VectorXd phat;    // trial-participation probability
  Eigen::VectorXd qhat;    // nested-part probability (1 when degenerate)
  Eigen::VectorXd ehat;    // probability of treatment a=1
  bool all_converged() const;
};

NuisanceSet fit_nuisances(const PartialNestDataset& data, const NuisanceSpec& spec = {});

struct EstimationOptions {
  bool normalized_weights = false;  // divide weighted terms by the weight sum
  double positivity_floor = 1e-6;
};

enum class EstimatorKind { trial_only, g_formula, weighting, augmented };

const char* estimator_name(EstimatorKind k);

double estimate_g_formula(const PartialNestDataset& data, const NuisanceSet& nuis, int arm);
double estimate_weighting(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                          const EstimationOptions& opts = {});
double estimate_augmented(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                          const EstimationOptions& opts = {});
double estimate_trial_only(const PartialNestDataset& data, const NuisanceSet& nuis, int arm);

// Per-row weights I(s=1, a=arm) q(x) / (p(x) e_arm(x)); zero elsewhere.
Eigen::VectorXd compute_weights(const PartialNestDataset& data, const NuisanceSet& nuis, int arm,
                                const EstimationOptions& opts = {});

struct PointEstimates {
  double psi0 = 0, psi1 = 0, ate = 0;
};
PointEstimates point_estimates(const PartialNestDataset& data, const NuisanceSet& nuis,
                               EstimatorKind kind, const EstimationOptions& opts = {});

struct ExchangeabilityResult {
  double statistic = 0;  // chi-square, 2 df (one Wald z per treatment arm)
  double p_value = 1;
};

// Refits each arm's outcome regression on trial rows from both parts
// with an added part indicator; small p-values are evidence against
// cross-part exchangeability.
ExchangeabilityResult part_exchangeability_test(const PartialNestDataset& data);

struct WeightDiagnostics {
  double weight_sum_ratio = 0;  // sum over trial rows of q/p, divided by the p=0 count
  bool ratio_flag = false;      // outside [0.8, 1.25]
  double min_participation_prob = 0;
  // percentiles of the fitted participation probability over target-part
  // rows, at 1, 5, 50, 95, 99 percent
  std::array<double, 5> participation_percentiles{};
  bool positivity_flag = false;  // 1st percentile below 0.02
  std::optional<ExchangeabilityResult> part_exchangeability;
};

WeightDiagnostics weight_diagnostic(const PartialNestDataset& data, const NuisanceSet& nuis);

// band and threshold used by the diagnostics above
inline constexpr double kRatioFlagLow = 0.8;
inline constexpr double kRatioFlagHigh = 1.25;
inline constexpr double kPositivityPercentileFloor = 0.02;

}  // namespace pnest
