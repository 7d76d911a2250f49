// Command-line front end. Everything estimation-related goes through the
// C API in pnest.h; this file only parses flags, shuttles files, and maps
// statuses to exit codes (0 ok, 2 bad input or usage, 3 estimation failure).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pnest.h"

namespace {

int exit_code_for(pnest_status st) {
  switch (st) {
    case PNEST_OK: return 0;
    case PNEST_E_ESTIMATION: return 3;
    case PNEST_E_VALIDATION:
    case PNEST_E_USAGE:
    default: return 2;
  }
}

int report_failure(pnest_status st) {
  std::cerr << "error: " << pnest_last_error() << "\n";
  return exit_code_for(st);
}

int usage_failure(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return 2;
}

bool prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: IoError: cannot create output directory '" << dir
              << "': " << ec.message() << "\n";
    return false;
  }
  return true;
}

// The .txt reports double as console output; echoing the written file keeps
// the two byte-identical.
void echo_file(const std::string& path) {
  std::ifstream in(path);
  std::cout << in.rdbuf();
}

struct CommonArgs {
  std::string out_dir = ".";
  int threads = 1;
  std::string outcome = "binary";
};

struct AnalyzeArgs {
  std::string input;
  std::vector<std::string> estimators{"trial", "g", "w", "aug"};
  std::string inference = "sandwich";
  int boot = 1000;
  uint64_t seed = 0;
  bool seed_set = false;
  bool stratified = false;
  double known_treat_prob = 0;
  bool known_treat_set = false;
  bool normalized = false;
};

int run_analyze(const CommonArgs& common, const AnalyzeArgs& args, bool diagnostics_only) {
  const bool want_boot = args.inference == "boot" || args.inference == "both";
  if (want_boot && !args.seed_set && !diagnostics_only)
    return usage_failure("bootstrap inference requires --seed");
  if (!prepare_out_dir(common.out_dir)) return 2;

  pnest_dataset* ds = nullptr;
  pnest_status st = pnest_dataset_from_csv(args.input.c_str(), nullptr, 0,
                                           common.outcome == "continuous" ? 1 : 0, &ds);
  if (st != PNEST_OK) return report_failure(st);

  pnest_analyze_options opts;
  pnest_analyze_options_init(&opts);
  if (diagnostics_only) {
    opts.do_sandwich = 0;
    opts.do_bootstrap = 0;
  } else {
    opts.use_trial = opts.use_g = opts.use_w = opts.use_aug = 0;
    for (const std::string& tok : args.estimators) {
      if (tok == "trial") opts.use_trial = 1;
      if (tok == "g") opts.use_g = 1;
      if (tok == "w") opts.use_w = 1;
      if (tok == "aug") opts.use_aug = 1;
    }
    opts.do_sandwich = (args.inference == "sandwich" || args.inference == "both") ? 1 : 0;
    opts.do_bootstrap = want_boot ? 1 : 0;
    opts.bootstrap_b = args.boot;
  }
  opts.has_seed = args.seed_set ? 1 : 0;
  opts.seed = args.seed;
  opts.threads = common.threads;
  opts.stratified_bootstrap = args.stratified ? 1 : 0;
  opts.has_known_treat_prob = args.known_treat_set ? 1 : 0;
  opts.known_treat_prob = args.known_treat_prob;
  opts.normalized_weights = args.normalized ? 1 : 0;
  opts.do_diagnostics = 1;

  pnest_analysis* an = nullptr;
  st = pnest_analyze(ds, &opts, &an);
  if (st != PNEST_OK) {
    pnest_dataset_free(ds);
    return report_failure(st);
  }

  const std::string base = common.out_dir + "/";
  std::string echo_path;
  if (!diagnostics_only) {
    st = pnest_analysis_write_csv(an, (base + "analysis.csv").c_str());
    if (st == PNEST_OK) st = pnest_analysis_write_text(an, (base + "analysis.txt").c_str());
    echo_path = base + "analysis.txt";
  }
  if (st == PNEST_OK)
    st = pnest_analysis_write_diagnostics_csv(an, (base + "diagnostics.csv").c_str());
  if (st == PNEST_OK)
    st = pnest_analysis_write_diagnostics_text(an, (base + "diagnostics.txt").c_str());
  if (diagnostics_only) echo_path = base + "diagnostics.txt";

  const int rc = st == PNEST_OK ? 0 : report_failure(st);
  if (rc == 0) echo_file(echo_path);
  pnest_analysis_free(an);
  pnest_dataset_free(ds);
  return rc;
}

struct SimulateArgs {
  std::string scenario;
  int runs = 1000;
  int boot = 0;
  uint64_t seed = 0;
};

int run_simulate(const CommonArgs& common, const SimulateArgs& args) {
  if (!prepare_out_dir(common.out_dir)) return 2;
  pnest_simulate_options opts;
  pnest_simulate_options_init(&opts);
  opts.scenario = args.scenario.c_str();
  opts.continuous_outcome = common.outcome == "continuous" ? 1 : 0;
  opts.runs = args.runs;
  opts.bootstrap_b = args.boot;
  opts.has_seed = 1;
  opts.seed = args.seed;
  opts.threads = common.threads;

  pnest_simreport* rep = nullptr;
  pnest_status st = pnest_simulate(&opts, &rep);
  if (st != PNEST_OK) return report_failure(st);

  const std::string base = common.out_dir + "/";
  st = pnest_simreport_write_csv(rep, (base + "simulation.csv").c_str());
  if (st == PNEST_OK) st = pnest_simreport_write_text(rep, (base + "simulation.txt").c_str());
  const int rc = st == PNEST_OK ? 0 : report_failure(st);
  if (rc == 0) echo_file(base + "simulation.txt");
  pnest_simreport_free(rep);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treatment effect estimation for partially nested trial designs"};
  app.require_subcommand(1);

  CommonArgs common;
  AnalyzeArgs analyze_args;
  SimulateArgs simulate_args;
  AnalyzeArgs diagnose_args;

  auto add_common = [&](CLI::App* sub, bool with_outcome) {
    sub->add_option("--out", common.out_dir, "output directory (created if missing)")
        ->capture_default_str();
    sub->add_option("--threads", common.threads, "worker thread count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    if (with_outcome)
      sub->add_option("--outcome", common.outcome, "outcome family")
          ->check(CLI::IsMember({"binary", "continuous"}))
          ->capture_default_str();
  };

  CLI::App* analyze = app.add_subcommand("analyze", "estimate from a CSV dataset");
  analyze->add_option("--input", analyze_args.input, "input CSV path")->required();
  analyze->add_option("--estimators", analyze_args.estimators,
                      "estimators to report (trial, g, w, aug)")
      ->delimiter(',')
      ->check(CLI::IsMember({"trial", "g", "w", "aug"}))
      ->capture_default_str();
  analyze->add_option("--inference", analyze_args.inference, "inference method")
      ->check(CLI::IsMember({"sandwich", "boot", "both"}))
      ->capture_default_str();
  analyze->add_option("--boot", analyze_args.boot, "bootstrap replicate count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* analyze_seed = analyze->add_option("--seed", analyze_args.seed,
                                           "RNG seed (required for bootstrap inference)");
  analyze->add_flag("--stratified-boot", analyze_args.stratified,
                    "resample within each part, preserving part sizes");
  auto* analyze_ktp =
      analyze->add_option("--known-treat-prob", analyze_args.known_treat_prob,
                          "treat the randomization probability as known instead of fitted");
  analyze->add_flag("--normalized-weights", analyze_args.normalized,
                    "divide weighted sums by the weight total");
  add_common(analyze, true);

  CLI::App* simulate = app.add_subcommand("simulate", "run the benchmark replication study");
  simulate->add_option("--scenario", simulate_args.scenario, "effect-modification scenario")
      ->check(CLI::IsMember({"no_em", "moderate_em", "strong_em"}))
      ->required();
  simulate->add_option("--runs", simulate_args.runs, "number of simulated datasets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--boot", simulate_args.boot,
                       "bootstrap replicates per run (0 skips bootstrap coverage)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  simulate->add_option("--seed", simulate_args.seed, "RNG seed")->required();
  add_common(simulate, true);

  CLI::App* diagnose = app.add_subcommand("diagnose", "weight and exchangeability diagnostics");
  diagnose->add_option("--input", diagnose_args.input, "input CSV path")->required();
  auto* diagnose_ktp =
      diagnose->add_option("--known-treat-prob", diagnose_args.known_treat_prob,
                           "treat the randomization probability as known instead of fitted");
  add_common(diagnose, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  analyze_args.seed_set = analyze_seed->count() > 0;
  analyze_args.known_treat_set = analyze_ktp->count() > 0;
  diagnose_args.known_treat_set = diagnose_ktp->count() > 0;

  if (app.got_subcommand(analyze)) return run_analyze(common, analyze_args, false);
  if (app.got_subcommand(simulate)) return run_simulate(common, simulate_args);
  return run_analyze(common, diagnose_args, true);
}
