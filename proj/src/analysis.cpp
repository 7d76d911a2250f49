#include "analysis.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace pnest {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

const char* estimand_names[3] = {"psi0", "psi1", "ate"};

double point_of(const PointEstimates& p, int q) {
  return q == 0 ? p.psi0 : (q == 1 ? p.psi1 : p.ate);
}

const IntervalEstimate& sandwich_of(const SandwichResult& s, int q) {
  return q == 0 ? s.psi0 : (q == 1 ? s.psi1 : s.ate);
}

const IntervalEstimate& boot_normal_of(const BootstrapResult& b, int q) {
  return q == 0 ? b.psi0_normal : (q == 1 ? b.psi1_normal : b.ate_normal);
}

const IntervalEstimate& boot_pct_of(const BootstrapResult& b, int q) {
  return q == 0 ? b.psi0_percentile : (q == 1 ? b.psi1_percentile : b.ate_percentile);
}

void diagnostics_text_block(const WeightDiagnostics& d, std::ostream& os) {
  char buf[256];
  os << "weight diagnostics\n";
  std::snprintf(buf, sizeof(buf),
                "  weight-sum ratio over target-part count: %.6f   alert band [%.2f, %.2f]: %s\n",
                d.weight_sum_ratio, kRatioFlagLow, kRatioFlagHigh,
                d.ratio_flag ? "FLAGGED" : "ok");
  os << buf;
  os << "  participation probability over target-part rows\n";
  std::snprintf(buf, sizeof(buf),
                "    min %.6f   p1 %.6f   p5 %.6f   p50 %.6f   p95 %.6f   p99 %.6f\n",
                d.min_participation_prob, d.participation_percentiles[0],
                d.participation_percentiles[1], d.participation_percentiles[2],
                d.participation_percentiles[3], d.participation_percentiles[4]);
  os << buf;
  std::snprintf(buf, sizeof(buf), "    positivity flag (1st percentile < %.2f): %s\n",
                kPositivityPercentileFloor, d.positivity_flag ? "FLAGGED" : "no");
  os << buf;
  if (d.part_exchangeability) {
    std::snprintf(buf, sizeof(buf), "  part-exchangeability test: chi2(2) = %.4f   p = %.4f\n",
                  d.part_exchangeability->statistic, d.part_exchangeability->p_value);
    os << buf;
  } else {
    os << "  part-exchangeability test: not applicable (trial rows span a single part)\n";
  }
}

}  // namespace

AnalysisReport analyze_dataset(const PartialNestDataset& data, const AnalysisOptions& opts) {
  AnalysisReport rep;
  rep.n = data.n();
  rep.n0 = data.n0();
  rep.n1 = data.n1();
  rep.outcome_kind = data.outcome_kind();

  NuisanceSet nuis = fit_nuisances(data, opts.spec);

  std::optional<BootstrapReplicates> reps;
  if (opts.do_bootstrap) {
    BootstrapOptions bo;
    bo.B = opts.bootstrap_B;
    bo.seed = opts.seed;
    bo.threads = opts.threads;
    bo.stratified = opts.stratified_bootstrap;
    reps = bootstrap_replicates(data, opts.spec, opts.est, bo);
  }

  std::vector<EstimatorKind> kinds = opts.estimators;
  if (kinds.empty())
    kinds = {EstimatorKind::trial_only, EstimatorKind::g_formula, EstimatorKind::weighting,
             EstimatorKind::augmented};
  for (EstimatorKind k : kinds) {
    EstimatorResult er;
    er.kind = k;
    er.point = point_estimates(data, nuis, k, opts.est);
    if (opts.do_sandwich) er.sandwich = sandwich_se(build_stack(data, nuis, k, opts.est));
    if (reps) er.bootstrap = bootstrap_extract(*reps, k, er.point);
    rep.estimators.push_back(std::move(er));
  }
  if (opts.do_diagnostics) rep.diagnostics = weight_diagnostic(data, nuis);
  return rep;
}

void write_analysis_csv(const AnalysisReport& rep, std::ostream& os) {
  os << "estimator,estimand,estimate,method,se,lower,upper\n";
  for (const EstimatorResult& er : rep.estimators) {
    const char* name = estimator_name(er.kind);
    for (int q = 0; q < 3; ++q) {
      const std::string est = fmt(point_of(er.point, q));
      os << name << ',' << estimand_names[q] << ',' << est << ",point,,,\n";
      if (er.sandwich) {
        const IntervalEstimate& iv = sandwich_of(*er.sandwich, q);
        os << name << ',' << estimand_names[q] << ',' << est << ",sandwich," << fmt(iv.se)
           << ',' << fmt(iv.lower) << ',' << fmt(iv.upper) << '\n';
      }
      if (er.bootstrap) {
        const IntervalEstimate& nv = boot_normal_of(*er.bootstrap, q);
        os << name << ',' << estimand_names[q] << ',' << est << ",bootstrap_normal,"
           << fmt(nv.se) << ',' << fmt(nv.lower) << ',' << fmt(nv.upper) << '\n';
        const IntervalEstimate& pv = boot_pct_of(*er.bootstrap, q);
        os << name << ',' << estimand_names[q] << ',' << est << ",bootstrap_percentile,"
           << fmt(pv.se) << ',' << fmt(pv.lower) << ',' << fmt(pv.upper) << '\n';
      }
    }
  }
}

void write_analysis_text(const AnalysisReport& rep, std::ostream& os) {
  char buf[256];
  os << "nested-design analysis\n";
  std::snprintf(buf, sizeof(buf),
                "rows: %d   target part (p=0): %d   nested-trial part (p=1): %d   outcome: %s\n",
                rep.n, rep.n0, rep.n1, outcome_kind_name(rep.outcome_kind));
  os << buf;
  os << '\n';
  std::snprintf(buf, sizeof(buf), "%-11s %-6s %12s  %-20s %12s %12s %12s\n", "estimator",
                "target", "estimate", "method", "se", "lower95", "upper95");
  os << buf;
  auto line = [&](const char* name, const char* target, double est, const char* method,
                  const IntervalEstimate* iv) {
    if (iv) {
      std::snprintf(buf, sizeof(buf), "%-11s %-6s %12.6f  %-20s %12.6f %12.6f %12.6f\n", name,
                    target, est, method, iv->se, iv->lower, iv->upper);
    } else {
      std::snprintf(buf, sizeof(buf), "%-11s %-6s %12.6f  %-20s %12s %12s %12s\n", name, target,
                    est, method, "", "", "");
    }
    os << buf;
  };
  for (const EstimatorResult& er : rep.estimators) {
    const char* name = estimator_name(er.kind);
    for (int q = 0; q < 3; ++q) {
      const double est = point_of(er.point, q);
      if (!er.sandwich && !er.bootstrap) line(name, estimand_names[q], est, "point", nullptr);
      if (er.sandwich)
        line(name, estimand_names[q], est, "sandwich", &sandwich_of(*er.sandwich, q));
      if (er.bootstrap) {
        line(name, estimand_names[q], est, "bootstrap_normal", &boot_normal_of(*er.bootstrap, q));
        line(name, estimand_names[q], est, "bootstrap_percentile",
             &boot_pct_of(*er.bootstrap, q));
      }
    }
  }
  for (const EstimatorResult& er : rep.estimators) {
    if (er.bootstrap && er.bootstrap->failed > 0) {
      std::snprintf(buf, sizeof(buf), "\nbootstrap: %d of %d replicates failed and were dropped\n",
                    er.bootstrap->failed, er.bootstrap->requested);
      os << buf;
      break;
    }
  }
  if (rep.diagnostics) {
    os << '\n';
    diagnostics_text_block(*rep.diagnostics, os);
  }
}

void write_diagnostics_csv(const AnalysisReport& rep, std::ostream& os) {
  os << "metric,value\n";
  if (!rep.diagnostics) return;
  const WeightDiagnostics& d = *rep.diagnostics;
  os << "weight_sum_ratio," << fmt(d.weight_sum_ratio) << '\n';
  os << "ratio_flag," << (d.ratio_flag ? 1 : 0) << '\n';
  os << "min_participation_prob," << fmt(d.min_participation_prob) << '\n';
  const int pct[5] = {1, 5, 50, 95, 99};
  for (int i = 0; i < 5; ++i)
    os << "participation_pct_" << pct[i] << ',' << fmt(d.participation_percentiles[i]) << '\n';
  os << "positivity_flag," << (d.positivity_flag ? 1 : 0) << '\n';
  if (d.part_exchangeability) {
    os << "exchangeability_statistic," << fmt(d.part_exchangeability->statistic) << '\n';
    os << "exchangeability_p_value," << fmt(d.part_exchangeability->p_value) << '\n';
  } else {
    os << "exchangeability_statistic,\n";
    os << "exchangeability_p_value,\n";
  }
}

void write_diagnostics_text(const AnalysisReport& rep, std::ostream& os) {
  char buf[128];
  os << "nested-design diagnostics\n";
  std::snprintf(buf, sizeof(buf),
                "rows: %d   target part (p=0): %d   nested-trial part (p=1): %d\n", rep.n,
                rep.n0, rep.n1);
  os << buf;
  os << '\n';
  if (rep.diagnostics) diagnostics_text_block(*rep.diagnostics, os);
}

}  // namespace pnest
