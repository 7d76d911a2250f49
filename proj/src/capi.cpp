#include "pnest.h"

#include <exception>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "simulation.hpp"

struct pnest_dataset {
  pnest::PartialNestDataset impl;
};
struct pnest_analysis {
  pnest::AnalysisReport impl;
};
struct pnest_simreport {
  pnest::SimulationReport impl;
};

namespace {

thread_local std::string t_last_error;

pnest_status fail(const pnest::Error& e) {
  t_last_error = e.what();
  return pnest::is_validation_error(e.code()) ? PNEST_E_VALIDATION : PNEST_E_ESTIMATION;
}

pnest_status fail_other(const std::exception& e) {
  t_last_error = e.what();
  return PNEST_E_ESTIMATION;
}

pnest_status fail_usage(const std::string& msg) {
  t_last_error = msg;
  return PNEST_E_USAGE;
}

pnest_status ok() {
  t_last_error.clear();
  return PNEST_OK;
}

template <typename Fn>
pnest_status guarded(Fn&& fn) {
  try {
    fn();
    return ok();
  } catch (const pnest::Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail_other(e);
  }
}

pnest_status write_with(const char* path, const std::string& what,
                        const std::function<void(std::ostream&)>& writer) {
  if (!path) return fail_usage("null path");
  return guarded([&] {
    std::ofstream out(path);
    if (!out) throw pnest::Error(pnest::ErrorCode::IoError, "cannot open '" + std::string(path) + "' for " + what);
    writer(out);
    out.flush();
    if (!out) throw pnest::Error(pnest::ErrorCode::IoError, "write failed for '" + std::string(path) + "'");
  });
}

const pnest::IntervalEstimate* interval_for(const pnest::EstimatorResult& er, int method,
                                            int target) {
  const pnest::SandwichResult* s = er.sandwich ? &*er.sandwich : nullptr;
  const pnest::BootstrapResult* b = er.bootstrap ? &*er.bootstrap : nullptr;
  switch (method) {
    case PNEST_METHOD_SANDWICH:
      if (!s) return nullptr;
      return target == 0 ? &s->psi0 : (target == 1 ? &s->psi1 : &s->ate);
    case PNEST_METHOD_BOOT_NORMAL:
      if (!b) return nullptr;
      return target == 0 ? &b->psi0_normal : (target == 1 ? &b->psi1_normal : &b->ate_normal);
    case PNEST_METHOD_BOOT_PERCENTILE:
      if (!b) return nullptr;
      return target == 0 ? &b->psi0_percentile
                         : (target == 1 ? &b->psi1_percentile : &b->ate_percentile);
    default:
      return nullptr;
  }
}

}  // namespace

extern "C" {

const char* pnest_last_error(void) { return t_last_error.c_str(); }

pnest_status pnest_dataset_from_csv(const char* path, const char* const* covariate_columns,
                                    size_t n_columns, int continuous_outcome,
                                    pnest_dataset** out) {
  if (!path || !out) return fail_usage("null argument");
  if (n_columns > 0 && !covariate_columns) return fail_usage("null covariate column list");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> cols;
    if (n_columns > 0) {
      for (size_t i = 0; i < n_columns; ++i) {
        if (!covariate_columns[i])
          throw pnest::Error(pnest::ErrorCode::InvariantViolation, "null covariate column name");
        cols.emplace_back(covariate_columns[i]);
      }
    } else {
      cols = pnest::csv_covariate_columns(path);
    }
    const pnest::OutcomeKind kind =
        continuous_outcome ? pnest::OutcomeKind::continuous : pnest::OutcomeKind::binary;
    *out = new pnest_dataset{pnest::parse_csv(path, cols, kind)};
  });
}

void pnest_dataset_free(pnest_dataset* ds) { delete ds; }

int pnest_dataset_n(const pnest_dataset* ds) { return ds ? ds->impl.n() : 0; }
int pnest_dataset_n_target(const pnest_dataset* ds) { return ds ? ds->impl.n0() : 0; }
int pnest_dataset_n_nested(const pnest_dataset* ds) { return ds ? ds->impl.n1() : 0; }

void pnest_analyze_options_init(pnest_analyze_options* opts) {
  if (!opts) return;
  *opts = pnest_analyze_options{};
  opts->use_trial = opts->use_g = opts->use_w = opts->use_aug = 1;
  opts->do_sandwich = 1;
  opts->do_bootstrap = 0;
  opts->bootstrap_b = 1000;
  opts->threads = 1;
  opts->do_diagnostics = 1;
}

pnest_status pnest_analyze(const pnest_dataset* ds, const pnest_analyze_options* opts,
                           pnest_analysis** out) {
  if (!ds || !opts || !out) return fail_usage("null argument");
  if (opts->do_bootstrap && !opts->has_seed)
    return fail_usage("bootstrap inference requires a seed");
  if (opts->do_bootstrap && opts->bootstrap_b < 1)
    return fail_usage("bootstrap replicate count must be >= 1");
  if (!opts->use_trial && !opts->use_g && !opts->use_w && !opts->use_aug)
    return fail_usage("no estimator selected");
  if (opts->has_known_treat_prob &&
      !(opts->known_treat_prob > 0.0 && opts->known_treat_prob < 1.0))
    return fail_usage("known treatment probability must lie in (0, 1)");
  *out = nullptr;
  return guarded([&] {
    pnest::AnalysisOptions ao;
    if (opts->use_trial) ao.estimators.push_back(pnest::EstimatorKind::trial_only);
    if (opts->use_g) ao.estimators.push_back(pnest::EstimatorKind::g_formula);
    if (opts->use_w) ao.estimators.push_back(pnest::EstimatorKind::weighting);
    if (opts->use_aug) ao.estimators.push_back(pnest::EstimatorKind::augmented);
    ao.do_sandwich = opts->do_sandwich != 0;
    ao.do_bootstrap = opts->do_bootstrap != 0;
    ao.bootstrap_B = opts->bootstrap_b;
    ao.seed = opts->seed;
    ao.threads = opts->threads > 0 ? opts->threads : 1;
    ao.stratified_bootstrap = opts->stratified_bootstrap != 0;
    if (opts->has_known_treat_prob) ao.spec.known_treat_prob = opts->known_treat_prob;
    ao.est.normalized_weights = opts->normalized_weights != 0;
    ao.do_diagnostics = opts->do_diagnostics != 0;
    *out = new pnest_analysis{pnest::analyze_dataset(ds->impl, ao)};
  });
}

void pnest_analysis_free(pnest_analysis* an) { delete an; }

pnest_status pnest_analysis_value(const pnest_analysis* an, int estimator, int target,
                                  int method, int measure, double* out) {
  if (!an || !out) return fail_usage("null argument");
  if (estimator < 0 || estimator > 3) return fail_usage("estimator index out of range");
  if (target < 0 || target > 2) return fail_usage("target index out of range");
  if (measure < 0 || measure > 3) return fail_usage("measure index out of range");
  const pnest::EstimatorResult* er = nullptr;
  for (const auto& cand : an->impl.estimators) {
    if (static_cast<int>(cand.kind) == estimator) {
      er = &cand;
      break;
    }
  }
  if (!er) return fail_usage("estimator not present in this report");
  if (method == PNEST_METHOD_POINT) {
    if (measure != PNEST_MEASURE_ESTIMATE)
      return fail_usage("point method only carries the estimate");
    *out = target == 0 ? er->point.psi0 : (target == 1 ? er->point.psi1 : er->point.ate);
    return ok();
  }
  const pnest::IntervalEstimate* iv = interval_for(*er, method, target);
  if (!iv) return fail_usage("requested inference method was not computed");
  switch (measure) {
    case PNEST_MEASURE_ESTIMATE: *out = iv->point; break;
    case PNEST_MEASURE_SE: *out = iv->se; break;
    case PNEST_MEASURE_LOWER: *out = iv->lower; break;
    default: *out = iv->upper; break;
  }
  return ok();
}

pnest_status pnest_analysis_write_csv(const pnest_analysis* an, const char* path) {
  if (!an) return fail_usage("null handle");
  return write_with(path, "analysis csv",
                    [&](std::ostream& os) { pnest::write_analysis_csv(an->impl, os); });
}

pnest_status pnest_analysis_write_text(const pnest_analysis* an, const char* path) {
  if (!an) return fail_usage("null handle");
  return write_with(path, "analysis text",
                    [&](std::ostream& os) { pnest::write_analysis_text(an->impl, os); });
}

pnest_status pnest_analysis_write_diagnostics_csv(const pnest_analysis* an, const char* path) {
  if (!an) return fail_usage("null handle");
  return write_with(path, "diagnostics csv",
                    [&](std::ostream& os) { pnest::write_diagnostics_csv(an->impl, os); });
}

pnest_status pnest_analysis_write_diagnostics_text(const pnest_analysis* an, const char* path) {
  if (!an) return fail_usage("null handle");
  return write_with(path, "diagnostics text",
                    [&](std::ostream& os) { pnest::write_diagnostics_text(an->impl, os); });
}

void pnest_simulate_options_init(pnest_simulate_options* opts) {
  if (!opts) return;
  *opts = pnest_simulate_options{};
  opts->scenario = "no_em";
  opts->runs = 1000;
  opts->bootstrap_b = 0;
  opts->threads = 1;
  opts->compute_sandwich = 1;
  opts->compute_diagnostics = 1;
  opts->truth_draws = 10000000;
}

pnest_status pnest_simulate(const pnest_simulate_options* opts, pnest_simreport** out) {
  if (!opts || !out) return fail_usage("null argument");
  if (!opts->scenario) return fail_usage("null scenario");
  if (!opts->has_seed) return fail_usage("simulation requires a seed");
  *out = nullptr;
  return guarded([&] {
    const pnest::OutcomeKind kind =
        opts->continuous_outcome ? pnest::OutcomeKind::continuous : pnest::OutcomeKind::binary;
    pnest::Scenario sc = pnest::Scenario::make(pnest::scenario_from_name(opts->scenario), kind);
    pnest::ReplicationOptions ro;
    ro.runs = opts->runs;
    ro.bootstrap_B = opts->bootstrap_b;
    ro.seed = opts->seed;
    ro.threads = opts->threads > 0 ? opts->threads : 1;
    ro.compute_sandwich = opts->compute_sandwich != 0;
    ro.compute_diagnostics = opts->compute_diagnostics != 0;
    if (opts->truth_draws > 0) ro.truth_draws = opts->truth_draws;
    *out = new pnest_simreport{pnest::run_replications(sc, ro)};
  });
}

void pnest_simreport_free(pnest_simreport* rep) { delete rep; }

pnest_status pnest_simreport_cell(const pnest_simreport* rep, int estimator, int target,
                                  int measure, double* out) {
  if (!rep || !out) return fail_usage("null argument");
  if (estimator < 0 || estimator > 3) return fail_usage("estimator index out of range");
  if (target < 0 || target > 2) return fail_usage("target index out of range");
  const pnest::CellSummary& cell = rep->impl.cells[estimator][target];
  switch (measure) {
    case PNEST_CELL_SCALED_BIAS: *out = cell.scaled_bias; return ok();
    case PNEST_CELL_SCALED_SD: *out = cell.scaled_sd; return ok();
    case PNEST_CELL_COVERAGE_SANDWICH:
      if (cell.coverage_sandwich < 0) return fail_usage("sandwich coverage was not computed");
      *out = cell.coverage_sandwich;
      return ok();
    case PNEST_CELL_COVERAGE_BOOTSTRAP:
      if (cell.coverage_bootstrap < 0) return fail_usage("bootstrap coverage was not computed");
      *out = cell.coverage_bootstrap;
      return ok();
    default:
      return fail_usage("measure index out of range");
  }
}

pnest_status pnest_simreport_truth(const pnest_simreport* rep, int target, double* out) {
  if (!rep || !out) return fail_usage("null argument");
  if (target < 0 || target > 2) return fail_usage("target index out of range");
  *out = target == 0 ? rep->impl.truth.psi0
                     : (target == 1 ? rep->impl.truth.psi1 : rep->impl.truth.ate);
  return ok();
}

int pnest_simreport_failed_runs(const pnest_simreport* rep) {
  return rep ? rep->impl.failed_runs : 0;
}

pnest_status pnest_simreport_write_csv(const pnest_simreport* rep, const char* path) {
  if (!rep) return fail_usage("null handle");
  return write_with(path, "simulation csv",
                    [&](std::ostream& os) { pnest::write_simulation_csv(rep->impl, os); });
}

pnest_status pnest_simreport_write_text(const pnest_simreport* rep, const char* path) {
  if (!rep) return fail_usage("null handle");
  return write_with(path, "simulation text",
                    [&](std::ostream& os) { pnest::write_simulation_text(rep->impl, os); });
}

}  // extern "C"
