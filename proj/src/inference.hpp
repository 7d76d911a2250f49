#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "estimators.hpp"

namespace pnest {

struct StackBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

// Per-observation estimating functions for one estimator: the score
// equations of every nuisance model the estimator depends on, the
// per-arm mean equations, and the effect closure. The plugged-in theta
// solves the empirical system.
struct StackedSystem {
  std::vector<StackBlock> blocks;
  int psi0_index = -1, psi1_index = -1, ate_index = -1;
  Eigen::VectorXd theta;
  int n = 0;
  // returns the n x dim matrix of estimating-function values
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> estfun;
  int dim() const { return static_cast<int>(theta.size()); }
};

StackedSystem build_stack(const PartialNestDataset& data, const NuisanceSet& nuis,
                          EstimatorKind kind, const EstimationOptions& opts = {});

struct IntervalEstimate {
  double point = 0, se = 0, lower = 0, upper = 0;
  std::string method;
};

struct SandwichResult {
  IntervalEstimate psi0, psi1, ate;
};

// Covariance A^{-1} B A^{-T} / n with A the numerical Jacobian of the
// mean estimating function (central differences) and B the empirical
// second moment.
SandwichResult sandwich_se(const StackedSystem& system);

struct BootstrapOptions {
  int B = 1000;
  uint64_t seed = 0;
  int threads = 1;
  bool stratified = false;  // resample within each part, preserving n0 and n1
};

// Replicate point estimates for all four estimators from one shared set
// of row resamples; rows of `est` are replicates, columns are
// estimator x estimand (kind-major), NaN where the replicate failed.
struct BootstrapReplicates {
  Eigen::MatrixXd est;
  Eigen::MatrixXi part_counts;  // per replicate: resampled rows with p=0, p=1
  int requested = 0, failed = 0;
};
BootstrapReplicates bootstrap_replicates(const PartialNestDataset& data, const NuisanceSpec& spec,
                                         const EstimationOptions& est_opts,
                                         const BootstrapOptions& opts);

struct BootstrapResult {
  IntervalEstimate psi0_normal, psi1_normal, ate_normal;
  IntervalEstimate psi0_percentile, psi1_percentile, ate_percentile;
  int requested = 0, completed = 0, failed = 0;
};

// Extracts one estimator's intervals from shared replicates, centered at
// the original-data point estimates.
BootstrapResult bootstrap_extract(const BootstrapReplicates& reps, EstimatorKind kind,
                                  const PointEstimates& center);

// Full-data nonparametric bootstrap for one estimator: refits all
// nuisances per replicate. Normal CIs use point +- 1.96 se; percentile
// CIs are also reported.
BootstrapResult bootstrap(const PartialNestDataset& data, const NuisanceSpec& spec,
                          const EstimationOptions& est_opts, EstimatorKind kind,
                          const BootstrapOptions& opts);

}  // namespace pnest
