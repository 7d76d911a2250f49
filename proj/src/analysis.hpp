#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "estimators.hpp"
#include "inference.hpp"

namespace pnest {

struct AnalysisOptions {
  std::vector<EstimatorKind> estimators;  // empty means all four
  bool do_sandwich = true;
  bool do_bootstrap = false;
  int bootstrap_B = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool stratified_bootstrap = false;
  NuisanceSpec spec;
  EstimationOptions est;
  bool do_diagnostics = true;
};

struct EstimatorResult {
  EstimatorKind kind = EstimatorKind::augmented;
  PointEstimates point;
  std::optional<SandwichResult> sandwich;
  std::optional<BootstrapResult> bootstrap;
};

struct AnalysisReport {
  int n = 0, n0 = 0, n1 = 0;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  std::vector<EstimatorResult> estimators;
  std::optional<WeightDiagnostics> diagnostics;
};

// Fits the nuisance models once, evaluates every requested estimator, and
// attaches the selected inference. Bootstrap replicates are shared: one set
// of resamples serves all estimators.
AnalysisReport analyze_dataset(const PartialNestDataset& data, const AnalysisOptions& opts);

void write_analysis_csv(const AnalysisReport& rep, std::ostream& os);
void write_analysis_text(const AnalysisReport& rep, std::ostream& os);
void write_diagnostics_csv(const AnalysisReport& rep, std::ostream& os);
void write_diagnostics_text(const AnalysisReport& rep, std::ostream& os);

}  // namespace pnest
