#include "simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>

#include "mathutil.hpp"
#include "rng.hpp"

namespace pnest {

namespace {

constexpr uint64_t kGenTag = 0x47454E44ULL;    // per-run cohort generation
constexpr uint64_t kTruthTag = 0x54525554ULL;  // truth integration
constexpr uint64_t kBootSeedTag = 0x9e3779b97f4a7c15ULL;

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

const char* scenario_name(ScenarioLabel s) {
  switch (s) {
    case ScenarioLabel::no_em: return "no_em";
    case ScenarioLabel::moderate_em: return "moderate_em";
    case ScenarioLabel::strong_em: return "strong_em";
  }
  return "?";
}

ScenarioLabel scenario_from_name(const std::string& name) {
  if (name == "no_em") return ScenarioLabel::no_em;
  if (name == "moderate_em") return ScenarioLabel::moderate_em;
  if (name == "strong_em") return ScenarioLabel::strong_em;
  throw Error(ErrorCode::InvariantViolation, "unknown scenario '" + name + "'");
}

Scenario Scenario::make(ScenarioLabel label, OutcomeKind kind) {
  Scenario sc;
  sc.label = label;
  sc.outcome_kind = kind;
  sc.selection_beta << -0.471, 0.5, 0.5, 0.5;
  sc.zeta0 << 0.5, 0.5, 0.5, 0.5;
  switch (label) {
    case ScenarioLabel::no_em:
      sc.zeta1 << 1.0, 0.5, 0.5, 0.5;
      break;
    case ScenarioLabel::moderate_em:
      sc.zeta1 << 1.0, 0.0, 0.5, 0.5;
      break;
    case ScenarioLabel::strong_em:
      sc.zeta1 << 1.0, 0.0, 0.0, 0.5;
      break;
  }
  return sc;
}

FullCohort generate_full_cohort(const Scenario& sc, std::mt19937_64& gen) {
  const int n = sc.n_total;
  FullCohort full;
  full.outcome_kind = sc.outcome_kind;
  full.x.resize(n, 3);
  full.s.resize(n);
  full.p.resize(n);
  full.a.resize(n);
  full.y0.resize(n);
  full.y1.resize(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d xt;
    xt(0) = 1.0;
    for (int j = 0; j < 3; ++j) {
      const double v = draw_normal(gen);
      full.x(i, j) = v;
      xt(j + 1) = v;
    }
    full.s(i) = draw_bernoulli(gen, expit(sc.selection_beta.dot(xt)));
    full.p(i) = draw_bernoulli(gen, sc.part_prob);
    full.a(i) = draw_bernoulli(gen, sc.treat_prob);
    const double eta0 = sc.zeta0.dot(xt);
    const double eta1 = sc.zeta1.dot(xt);
    if (sc.outcome_kind == OutcomeKind::binary) {
      full.y0(i) = draw_bernoulli(gen, expit(eta0));
      full.y1(i) = draw_bernoulli(gen, expit(eta1));
    } else {
      full.y0(i) = eta0 + draw_normal(gen);
      full.y1(i) = eta1 + draw_normal(gen);
    }
  }
  return full;
}

PartialNestDataset induce_partial_nesting(const FullCohort& full) {
  const int n = static_cast<int>(full.s.size());
  std::vector<Observation> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (full.s(i) == 0 && full.p(i) == 1) continue;
    Observation o;
    o.x = {full.x(i, 0), full.x(i, 1), full.x(i, 2)};
    o.p = full.p(i);
    o.s = full.s(i);
    if (full.s(i) == 1) {
      o.a = full.a(i);
      o.y = full.a(i) == 1 ? full.y1(i) : full.y0(i);
    }
    rows.push_back(std::move(o));
  }
  return PartialNestDataset::from_rows(std::move(rows), {"x1", "x2", "x3"}, full.outcome_kind);
}

TruthEstimate monte_carlo_truth(const Scenario& sc, std::int64_t draws, std::uint64_t seed) {
  TruthEstimate t;
  if (sc.outcome_kind == OutcomeKind::continuous) {
    // E[zeta . (1, X)] = intercept under centered covariates
    t.psi0 = sc.zeta0(0);
    t.psi1 = sc.zeta1(0);
    t.ate = t.psi1 - t.psi0;
    return t;
  }
  if (draws < 1) throw Error(ErrorCode::InvariantViolation, "truth draws must be >= 1");
  auto gen = make_stream(seed, 0, kTruthTag);
  double sum0 = 0, sum1 = 0;
  std::int64_t m = 0;
  Eigen::Vector4d xt;
  xt(0) = 1.0;
  for (std::int64_t i = 0; i < draws; ++i) {
    xt(1) = draw_normal(gen);
    xt(2) = draw_normal(gen);
    xt(3) = draw_normal(gen);
    if (draw_bernoulli(gen, sc.part_prob) == 1) continue;
    sum0 += expit(sc.zeta0.dot(xt));
    sum1 += expit(sc.zeta1.dot(xt));
    ++m;
  }
  if (m == 0) throw Error(ErrorCode::InvariantViolation, "no target-part draws in truth sample");
  t.psi0 = sum0 / static_cast<double>(m);
  t.psi1 = sum1 / static_cast<double>(m);
  t.ate = t.psi1 - t.psi0;
  return t;
}

SimulationReport run_replications(const Scenario& sc, const ReplicationOptions& opts) {
  if (opts.runs < 1) throw Error(ErrorCode::InvariantViolation, "runs must be >= 1");
  SimulationReport rep;
  rep.label = sc.label;
  rep.outcome_kind = sc.outcome_kind;
  rep.runs = opts.runs;
  rep.bootstrap_B = opts.bootstrap_B;
  rep.seed = opts.seed;
  rep.truth = monte_carlo_truth(sc, opts.truth_draws, opts.seed);
  const double truth_q[3] = {rep.truth.psi0, rep.truth.psi1, rep.truth.ate};

  const int R = opts.runs;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd points = Eigen::MatrixXd::Constant(R, 12, nan);
  Eigen::MatrixXd cov_sand = Eigen::MatrixXd::Constant(R, 12, nan);
  Eigen::MatrixXd cov_boot = Eigen::MatrixXd::Constant(R, 12, nan);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Constant(R, 4, nan);
  std::vector<char> ok(R, 0);

  auto run_one = [&](int r) {
    auto gen = make_stream(opts.seed, static_cast<uint64_t>(r) + 1, kGenTag);
    FullCohort full = generate_full_cohort(sc, gen);
    PartialNestDataset data = induce_partial_nesting(full);
    NuisanceSet nuis = fit_nuisances(data, opts.spec);
    PointEstimates pts[4];
    for (int k = 0; k < 4; ++k) {
      pts[k] = point_estimates(data, nuis, static_cast<EstimatorKind>(k), opts.est);
      points(r, 3 * k + 0) = pts[k].psi0;
      points(r, 3 * k + 1) = pts[k].psi1;
      points(r, 3 * k + 2) = pts[k].ate;
    }
    if (opts.compute_sandwich) {
      for (int k = 0; k < 4; ++k) {
        StackedSystem sys = build_stack(data, nuis, static_cast<EstimatorKind>(k), opts.est);
        SandwichResult sr = sandwich_se(sys);
        const IntervalEstimate* iv[3] = {&sr.psi0, &sr.psi1, &sr.ate};
        for (int q = 0; q < 3; ++q)
          cov_sand(r, 3 * k + q) =
              (iv[q]->lower <= truth_q[q] && truth_q[q] <= iv[q]->upper) ? 1.0 : 0.0;
      }
    }
    if (opts.bootstrap_B > 0) {
      uint64_t st = opts.seed;
      (void)splitmix64(st);
      st ^= (static_cast<uint64_t>(r) + 1) * kBootSeedTag;
      BootstrapOptions bo;
      bo.B = opts.bootstrap_B;
      bo.seed = splitmix64(st);
      bo.threads = 1;
      BootstrapReplicates reps = bootstrap_replicates(data, opts.spec, opts.est, bo);
      for (int k = 0; k < 4; ++k) {
        BootstrapResult br = bootstrap_extract(reps, static_cast<EstimatorKind>(k), pts[k]);
        const IntervalEstimate* iv[3] = {&br.psi0_normal, &br.psi1_normal, &br.ate_normal};
        for (int q = 0; q < 3; ++q)
          cov_boot(r, 3 * k + q) =
              (iv[q]->lower <= truth_q[q] && truth_q[q] <= iv[q]->upper) ? 1.0 : 0.0;
      }
    }
    if (opts.compute_diagnostics) {
      WeightDiagnostics wd = weight_diagnostic(data, nuis);
      diag(r, 0) = (wd.weight_sum_ratio >= 0.9 && wd.weight_sum_ratio <= 1.1) ? 1.0 : 0.0;
      diag(r, 1) = wd.ratio_flag ? 1.0 : 0.0;
      diag(r, 2) = wd.positivity_flag ? 1.0 : 0.0;
      diag(r, 3) =
          (wd.part_exchangeability && wd.part_exchangeability->p_value < 0.05) ? 1.0 : 0.0;
    }
    ok[r] = 1;
  };

  auto run_range = [&](int lo, int hi) {
    for (int r = lo; r < hi; ++r) {
      try {
        run_one(r);
      } catch (const Error&) {
        ok[r] = 0;
      }
    }
  };

  int T = std::clamp(opts.threads, 1, R);
  if (T == 1) {
    run_range(0, R);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (R + T - 1) / T;
    for (int t = 0; t < T; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(R, lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back(run_range, lo, hi);
    }
    for (auto& w : workers) w.join();
  }

  int failed = 0;
  for (char o : ok)
    if (!o) ++failed;
  rep.failed_runs = failed;
  if (static_cast<long long>(failed) * 50 > R)
    throw Error(ErrorCode::TooManyFailedRuns, std::to_string(failed) + " of " +
                                                  std::to_string(R) + " runs failed (> 2%)");

  const double scale = std::sqrt(static_cast<double>(sc.n_total));
  auto column_mean = [&](const Eigen::MatrixXd& m, int col) -> double {
    double sum = 0;
    int cnt = 0;
    for (int r = 0; r < R; ++r) {
      if (!ok[r] || std::isnan(m(r, col))) continue;
      sum += m(r, col);
      ++cnt;
    }
    return cnt > 0 ? sum / cnt : std::numeric_limits<double>::quiet_NaN();
  };

  for (int k = 0; k < 4; ++k) {
    for (int q = 0; q < 3; ++q) {
      const int col = 3 * k + q;
      double sum = 0;
      int cnt = 0;
      for (int r = 0; r < R; ++r) {
        if (!ok[r]) continue;
        sum += points(r, col);
        ++cnt;
      }
      const double mean = sum / cnt;
      double ssq = 0;
      for (int r = 0; r < R; ++r) {
        if (!ok[r]) continue;
        const double d = points(r, col) - mean;
        ssq += d * d;
      }
      CellSummary& cell = rep.cells[k][q];
      cell.scaled_bias = scale * (mean - truth_q[q]);
      cell.scaled_sd = cnt > 1 ? scale * std::sqrt(ssq / (cnt - 1)) : 0.0;
      const double cs = column_mean(cov_sand, col);
      const double cb = column_mean(cov_boot, col);
      cell.coverage_sandwich = std::isnan(cs) ? -1.0 : cs;
      cell.coverage_bootstrap = std::isnan(cb) ? -1.0 : cb;
    }
  }
  auto rate = [&](int col) -> double {
    const double v = column_mean(diag, col);
    return std::isnan(v) ? -1.0 : v;
  };
  rep.ratio_in_unit_band_rate = rate(0);
  rep.ratio_flag_rate = rate(1);
  rep.positivity_flag_rate = rate(2);
  rep.exchangeability_reject_rate = rate(3);
  return rep;
}

void write_simulation_csv(const SimulationReport& rep, std::ostream& os) {
  os << "scenario,outcome,runs,bootstrap_b,seed,failed_runs,estimator,estimand,truth,"
        "scaled_bias,scaled_sd,coverage_sandwich,coverage_bootstrap\n";
  const double truth_q[3] = {rep.truth.psi0, rep.truth.psi1, rep.truth.ate};
  const char* estimand_names[3] = {"psi0", "psi1", "ate"};
  for (int k = 0; k < 4; ++k) {
    for (int q = 0; q < 3; ++q) {
      const CellSummary& cell = rep.cells[k][q];
      os << scenario_name(rep.label) << ',' << outcome_kind_name(rep.outcome_kind) << ','
         << rep.runs << ',' << rep.bootstrap_B << ',' << rep.seed << ',' << rep.failed_runs
         << ',' << estimator_name(static_cast<EstimatorKind>(k)) << ',' << estimand_names[q]
         << ',' << fmt(truth_q[q]) << ',' << fmt(cell.scaled_bias) << ','
         << fmt(cell.scaled_sd) << ',';
      if (cell.coverage_sandwich >= 0) os << fmt(cell.coverage_sandwich);
      os << ',';
      if (cell.coverage_bootstrap >= 0) os << fmt(cell.coverage_bootstrap);
      os << '\n';
    }
  }
}

void write_simulation_text(const SimulationReport& rep, std::ostream& os) {
  char buf[256];
  os << "nested-design simulation summary\n";
  std::snprintf(buf, sizeof(buf), "scenario: %s   outcome: %s   runs: %d   bootstrap B: %d   seed: %llu\n",
                scenario_name(rep.label), outcome_kind_name(rep.outcome_kind), rep.runs,
                rep.bootstrap_B, static_cast<unsigned long long>(rep.seed));
  os << buf;
  std::snprintf(buf, sizeof(buf), "truth: psi0 %.6f   psi1 %.6f   ate %.6f\n", rep.truth.psi0,
                rep.truth.psi1, rep.truth.ate);
  os << buf;
  os << "failed runs: " << rep.failed_runs << "\n";

  const char* estimand_names[3] = {"psi0", "psi1", "ate"};
  auto block = [&](const char* title, auto getter, bool available) {
    if (!available) return;
    os << "\n" << title << "\n";
    std::snprintf(buf, sizeof(buf), "%-12s %-9s %11s %11s %11s %11s\n", "scenario", "estimand",
                  "trial_only", "g_formula", "weighting", "augmented");
    os << buf;
    for (int q = 0; q < 3; ++q) {
      std::snprintf(buf, sizeof(buf), "%-12s %-9s %11.3f %11.3f %11.3f %11.3f\n",
                    scenario_name(rep.label), estimand_names[q], getter(rep.cells[0][q]),
                    getter(rep.cells[1][q]), getter(rep.cells[2][q]), getter(rep.cells[3][q]));
      os << buf;
    }
  };
  std::string bias_title = "scaled bias (x sqrt(n))";
  block(bias_title.c_str(), [](const CellSummary& c) { return c.scaled_bias; }, true);
  block("scaled sd (x sqrt(n))", [](const CellSummary& c) { return c.scaled_sd; }, true);
  block("coverage, sandwich 95% CI", [](const CellSummary& c) { return c.coverage_sandwich; },
        rep.cells[0][0].coverage_sandwich >= 0);
  block("coverage, bootstrap normal 95% CI",
        [](const CellSummary& c) { return c.coverage_bootstrap; },
        rep.cells[0][0].coverage_bootstrap >= 0);

  if (rep.ratio_in_unit_band_rate >= 0) {
    os << "\ndiagnostic rates over successful runs\n";
    std::snprintf(buf, sizeof(buf), "  weight-sum ratio in [0.90, 1.10]:   %.3f\n",
                  rep.ratio_in_unit_band_rate);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  ratio outside alert band [0.8, 1.25]: %.3f\n",
                  rep.ratio_flag_rate);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  positivity flag:                    %.3f\n",
                  rep.positivity_flag_rate);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  exchangeability rejections (0.05):  %.3f\n",
                  rep.exchangeability_reject_rate);
    os << buf;
  }
}

}  // namespace pnest
