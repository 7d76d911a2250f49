#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

#include "estimators.hpp"
#include "inference.hpp"

namespace pnest {

enum class ScenarioLabel { no_em, moderate_em, strong_em };

const char* scenario_name(ScenarioLabel s);
ScenarioLabel scenario_from_name(const std::string& name);

// Data-generating process for the nested-design benchmark. Three standard
// normal covariates; trial entry S depends on all of them, the part indicator
// P is a fair coin independent of (X, S), treatment is randomized 1:1 within
// the trial. Effect modification strength is controlled by how many slope
// coefficients differ between the two potential-outcome models.
struct Scenario {
  ScenarioLabel label = ScenarioLabel::no_em;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  int n_total = 750;
  Eigen::Vector4d selection_beta;  // trial participation: intercept, x1..x3
  Eigen::Vector4d zeta0;           // outcome model under control
  Eigen::Vector4d zeta1;           // outcome model under treatment
  double part_prob = 0.5;          // Pr[P = 1]
  double treat_prob = 0.5;

  static Scenario make(ScenarioLabel label, OutcomeKind kind);
};

// One complete cohort before the design hides anything: covariates, S, P, A,
// and both potential outcomes for every unit.
struct FullCohort {
  OutcomeKind outcome_kind = OutcomeKind::binary;
  Eigen::MatrixXd x;  // n x 3
  Eigen::VectorXi s, p, a;
  Eigen::VectorXd y0, y1;
};

FullCohort generate_full_cohort(const Scenario& sc, std::mt19937_64& gen);

// Applies the partially nested sampling scheme: units with S=0, P=1 are never
// observed, potential-outcome columns are stripped, treatment and outcome are
// blanked outside the trial, and the observed outcome is the potential
// outcome matching the assigned arm.
PartialNestDataset induce_partial_nesting(const FullCohort& full);

struct TruthEstimate {
  double psi0 = 0, psi1 = 0, ate = 0;
};

// Target-population means E[Y^a | P=0]. P is independent of everything here,
// so this equals E[Y^a]; the draw loop still conditions on P = 0 to keep the
// estimand definition visible. Conditional outcome means are averaged
// directly instead of simulating Y, which removes the outcome noise layer;
// for the linear outcome the covariate average integrates exactly to the
// intercept, so that case returns the closed form.
TruthEstimate monte_carlo_truth(const Scenario& sc, std::int64_t draws, std::uint64_t seed);

struct ReplicationOptions {
  int runs = 1000;
  int bootstrap_B = 0;  // 0 disables bootstrap coverage
  std::uint64_t seed = 0;
  int threads = 1;
  NuisanceSpec spec;
  EstimationOptions est;
  bool compute_sandwich = true;
  bool compute_diagnostics = true;
  std::int64_t truth_draws = 10000000;
};

struct CellSummary {
  double scaled_bias = 0;
  double scaled_sd = 0;
  double coverage_sandwich = -1;  // -1 when not computed
  double coverage_bootstrap = -1;
};

struct SimulationReport {
  ScenarioLabel label = ScenarioLabel::no_em;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  TruthEstimate truth;
  int runs = 0;
  int bootstrap_B = 0;
  std::uint64_t seed = 0;
  int failed_runs = 0;
  // cells[kind][estimand], kind indexed by EstimatorKind order, estimand
  // 0/1/2 for psi0/psi1/ate
  std::array<std::array<CellSummary, 3>, 4> cells;
  // diagnostic rates across successful runs (-1 when not computed)
  double ratio_in_unit_band_rate = -1;  // weight-sum ratio within [0.9, 1.1]
  double ratio_flag_rate = -1;          // outside the [0.8, 1.25] alert band
  double positivity_flag_rate = -1;
  double exchangeability_reject_rate = -1;  // p < 0.05
};

SimulationReport run_replications(const Scenario& sc, const ReplicationOptions& opts);

void write_simulation_csv(const SimulationReport& rep, std::ostream& os);
void write_simulation_text(const SimulationReport& rep, std::ostream& os);

}  // namespace pnest
