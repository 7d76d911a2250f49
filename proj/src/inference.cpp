#include "inference.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <thread>

#include "mathutil.hpp"
#include "rng.hpp"

namespace pnest {

namespace {

constexpr double kStackMeanTol = 1e-6;
constexpr double kZ95 = 1.959963984540054;  // standard normal 97.5% point
constexpr uint64_t kBootTag = 0xB007AEED15ULL;

struct StackContext {
  int n = 0;
  EstimatorKind kind = EstimatorKind::augmented;
  bool normalized = false;
  bool outcome_linear = false;
  bool has_outcome = false, has_weights = false, has_part = false, has_treat = false;
  double known_e = 0.5;
  Eigen::ArrayXd s1, p0, s1a0, s1a1, sA, aA, y;
  Eigen::MatrixXd Fout, Fpartic, Fpart, Ftreat;
  int off_g0 = -1, off_g1 = -1, off_p = -1, off_q = -1, off_e = -1, off_r = -1, off_psi = -1;
  int kout = 0, kp = 0, kq = 0, ke = 0, dim = 0;

  Eigen::MatrixXd operator()(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, dim);
    Eigen::ArrayXd g0, g1, w0, w1;

    if (has_outcome) {
      Eigen::ArrayXd eta0 = (Fout * theta.segment(off_g0, kout)).array();
      Eigen::ArrayXd eta1 = (Fout * theta.segment(off_g1, kout)).array();
      if (outcome_linear) {
        g0 = eta0;
        g1 = eta1;
      } else {
        g0 = eta0.unaryExpr([](double v) { return expit(v); });
        g1 = eta1.unaryExpr([](double v) { return expit(v); });
      }
      M.block(0, off_g0, n, kout) = (Fout.array().colwise() * (s1a0 * (y - g0))).matrix();
      M.block(0, off_g1, n, kout) = (Fout.array().colwise() * (s1a1 * (y - g1))).matrix();
    }

    if (has_weights) {
      Eigen::ArrayXd p =
          (Fpartic * theta.segment(off_p, kp)).array().unaryExpr([](double v) { return expit(v); });
      M.block(0, off_p, n, kp) = (Fpartic.array().colwise() * (sA - p)).matrix();

      Eigen::ArrayXd q = Eigen::ArrayXd::Ones(n);
      if (has_part) {
        q = (Fpart * theta.segment(off_q, kq)).array().unaryExpr([](double v) { return expit(v); });
        M.block(0, off_q, n, kq) = (Fpart.array().colwise() * (p0 - q)).matrix();
      }

      Eigen::ArrayXd e = Eigen::ArrayXd::Constant(n, known_e);
      if (has_treat) {
        e = (Ftreat * theta.segment(off_e, ke)).array().unaryExpr([](double v) { return expit(v); });
        M.block(0, off_e, n, ke) = (Ftreat.array().colwise() * (s1 * (aA - e))).matrix();
      }

      w0 = s1a0 * q / (p * (1.0 - e));
      w1 = s1a1 * q / (p * e);
    }

    const double psi0 = theta(off_psi), psi1 = theta(off_psi + 1), ate = theta(off_psi + 2);
    switch (kind) {
      case EstimatorKind::trial_only:
        M.col(off_psi) = (s1 * (g0 - psi0)).matrix();
        M.col(off_psi + 1) = (s1 * (g1 - psi1)).matrix();
        M.col(off_psi + 2) = (s1 * (psi1 - psi0 - ate)).matrix();
        break;
      case EstimatorKind::g_formula:
        M.col(off_psi) = (p0 * (g0 - psi0)).matrix();
        M.col(off_psi + 1) = (p0 * (g1 - psi1)).matrix();
        M.col(off_psi + 2) = (p0 * (psi1 - psi0 - ate)).matrix();
        break;
      case EstimatorKind::weighting:
        if (normalized) {
          M.col(off_psi) = (w0 * (y - psi0)).matrix();
          M.col(off_psi + 1) = (w1 * (y - psi1)).matrix();
        } else {
          M.col(off_psi) = (w0 * y - p0 * psi0).matrix();
          M.col(off_psi + 1) = (w1 * y - p0 * psi1).matrix();
        }
        M.col(off_psi + 2) = (p0 * (psi1 - psi0 - ate)).matrix();
        break;
      case EstimatorKind::augmented:
        if (normalized) {
          const double r0 = theta(off_r), r1 = theta(off_r + 1);
          M.col(off_r) = (w0 * (y - g0 - r0)).matrix();
          M.col(off_r + 1) = (w1 * (y - g1 - r1)).matrix();
          M.col(off_psi) = (p0 * (g0 + r0 - psi0)).matrix();
          M.col(off_psi + 1) = (p0 * (g1 + r1 - psi1)).matrix();
        } else {
          M.col(off_psi) = (w0 * (y - g0) + p0 * (g0 - psi0)).matrix();
          M.col(off_psi + 1) = (w1 * (y - g1) + p0 * (g1 - psi1)).matrix();
        }
        M.col(off_psi + 2) = (p0 * (psi1 - psi0 - ate)).matrix();
        break;
    }
    return M;
  }
};

Eigen::MatrixXd masked_full_design(const PartialNestDataset& data,
                                   const std::optional<std::vector<int>>& cols) {
  const std::vector<int>* sel = cols ? &*cols : nullptr;
  return design_matrix(data, [](const Observation&) { return true; }, sel).F;
}

}  // namespace

StackedSystem build_stack(const PartialNestDataset& data, const NuisanceSet& nuis,
                          EstimatorKind kind, const EstimationOptions& opts) {
  if (!nuis.all_converged())
    throw Error(ErrorCode::StackInconsistent, "a nuisance model did not converge");

  auto ctx = std::make_shared<StackContext>();
  const int n = data.n();
  ctx->n = n;
  ctx->kind = kind;
  ctx->normalized = opts.normalized_weights;
  ctx->outcome_linear = data.outcome_kind() == OutcomeKind::continuous;
  ctx->has_outcome = kind != EstimatorKind::weighting;
  ctx->has_weights = kind == EstimatorKind::weighting || kind == EstimatorKind::augmented;
  ctx->has_part = ctx->has_weights && nuis.part.has_value();
  ctx->has_treat = ctx->has_weights && nuis.treatment.has_value();
  if (!ctx->has_treat) ctx->known_e = nuis.known_treat_prob.value_or(0.5);

  ctx->s1 = data.s().cast<double>().array();
  ctx->p0 = (data.p().array() == 0).cast<double>();
  ctx->sA = ctx->s1;
  ctx->aA = data.a().cast<double>().array().max(0.0);
  ctx->s1a0 = ctx->s1 * (1.0 - ctx->aA);
  ctx->s1a1 = ctx->s1 * ctx->aA;
  ctx->y = data.y().array().unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });

  StackedSystem sys;
  sys.n = n;
  int off = 0;
  auto add_block = [&](const std::string& name, int size) {
    sys.blocks.push_back({name, off, size});
    off += size;
    return off - size;
  };

  std::vector<double> theta;
  auto append_coef = [&](const Eigen::VectorXd& c) {
    for (int j = 0; j < c.size(); ++j) theta.push_back(c(j));
  };

  if (ctx->has_outcome) {
    ctx->Fout = masked_full_design(data, nuis.spec.outcome_cols);
    ctx->kout = static_cast<int>(ctx->Fout.cols());
    ctx->off_g0 = add_block("outcome_arm0", ctx->kout);
    append_coef(nuis.outcome0.coef);
    ctx->off_g1 = add_block("outcome_arm1", ctx->kout);
    append_coef(nuis.outcome1.coef);
  }
  if (ctx->has_weights) {
    ctx->Fpartic = masked_full_design(data, nuis.spec.participation_cols);
    ctx->kp = static_cast<int>(ctx->Fpartic.cols());
    ctx->off_p = add_block("participation", ctx->kp);
    append_coef(nuis.participation.coef);
    if (ctx->has_part) {
      ctx->Fpart = masked_full_design(data, nuis.spec.part_cols);
      ctx->kq = static_cast<int>(ctx->Fpart.cols());
      ctx->off_q = add_block("part", ctx->kq);
      append_coef(nuis.part->coef);
    }
    if (ctx->has_treat) {
      ctx->Ftreat = masked_full_design(data, nuis.spec.treatment_cols);
      ctx->ke = static_cast<int>(ctx->Ftreat.cols());
      ctx->off_e = add_block("treatment", ctx->ke);
      append_coef(nuis.treatment->coef);
    }
  }

  const PointEstimates pe = point_estimates(data, nuis, kind, opts);
  if (kind == EstimatorKind::augmented && opts.normalized_weights) {
    ctx->off_r = add_block("weighted_residual_means", 2);
    for (int arm = 0; arm < 2; ++arm) {
      const Eigen::VectorXd w = compute_weights(data, nuis, arm, opts);
      const Eigen::ArrayXd& g = arm == 1 ? nuis.g1.array() : nuis.g0.array();
      double num = 0, den = 0;
      for (int i = 0; i < n; ++i)
        if (w(i) != 0) {
          num += w(i) * (data.y()(i) - g(i));
          den += w(i);
        }
      theta.push_back(num / den);
    }
  }
  ctx->off_psi = add_block("targets", 3);
  theta.push_back(pe.psi0);
  theta.push_back(pe.psi1);
  theta.push_back(pe.ate);

  ctx->dim = off;
  sys.theta = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<int>(theta.size()));
  sys.psi0_index = ctx->off_psi;
  sys.psi1_index = ctx->off_psi + 1;
  sys.ate_index = ctx->off_psi + 2;
  sys.estfun = [ctx](const Eigen::VectorXd& th) { return (*ctx)(th); };

  const Eigen::VectorXd mean = sys.estfun(sys.theta).colwise().mean();
  const double worst = mean.cwiseAbs().maxCoeff();
  if (worst > kStackMeanTol)
    throw Error(ErrorCode::StackInconsistent,
                "empirical estimating-function mean has max-norm " + std::to_string(worst) +
                    " at the plug-in solution");
  return sys;
}

SandwichResult sandwich_se(const StackedSystem& sys) {
  const int K = sys.dim();
  const int n = sys.n;
  const Eigen::MatrixXd M0 = sys.estfun(sys.theta);
  const Eigen::MatrixXd B = M0.transpose() * M0 / n;

  Eigen::MatrixXd A(K, K);
  for (int j = 0; j < K; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(sys.theta(j)));
    Eigen::VectorXd up = sys.theta, dn = sys.theta;
    up(j) += h;
    dn(j) -= h;
    const Eigen::VectorXd mu = sys.estfun(up).colwise().mean();
    const Eigen::VectorXd md = sys.estfun(dn).colwise().mean();
    A.col(j) = -(mu - md) / (2.0 * h);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw Error(ErrorCode::SingularBread, "bread matrix is singular");
  const Eigen::MatrixXd Ainv = lu.inverse();
  Eigen::MatrixXd cov = Ainv * B * Ainv.transpose() / n;
  cov = ((cov + cov.transpose()) / 2.0).eval();

  auto iv = [&](int idx) {
    IntervalEstimate e;
    e.point = sys.theta(idx);
    e.se = std::sqrt(std::max(0.0, cov(idx, idx)));
    e.lower = e.point - kZ95 * e.se;
    e.upper = e.point + kZ95 * e.se;
    e.method = "sandwich";
    return e;
  };
  return SandwichResult{iv(sys.psi0_index), iv(sys.psi1_index), iv(sys.ate_index)};
}

BootstrapReplicates bootstrap_replicates(const PartialNestDataset& data, const NuisanceSpec& spec,
                                         const EstimationOptions& est_opts,
                                         const BootstrapOptions& opts) {
  if (opts.B < 100)
    throw Error(ErrorCode::InvariantViolation, "bootstrap needs at least 100 replicates");
  const int n = data.n();
  std::vector<int> pool0, pool1;
  if (opts.stratified) {
    for (int i = 0; i < n; ++i) (data.p()(i) == 0 ? pool0 : pool1).push_back(i);
  }

  BootstrapReplicates out;
  out.requested = opts.B;
  out.est.setConstant(opts.B, 12, std::numeric_limits<double>::quiet_NaN());
  out.part_counts.setZero(opts.B, 2);
  std::vector<char> ok(opts.B, 0);

  auto run_range = [&](int b0, int b1) {
    std::vector<Observation> rows;
    rows.reserve(n);
    for (int b = b0; b < b1; ++b) {
      std::mt19937_64 g = make_stream(opts.seed, static_cast<uint64_t>(b) + 1, kBootTag);
      rows.clear();
      if (opts.stratified) {
        for (size_t k = 0; k < pool0.size(); ++k)
          rows.push_back(data.rows()[pool0[draw_index(g, static_cast<int>(pool0.size()))]]);
        for (size_t k = 0; k < pool1.size(); ++k)
          rows.push_back(data.rows()[pool1[draw_index(g, static_cast<int>(pool1.size()))]]);
      } else {
        for (int k = 0; k < n; ++k) rows.push_back(data.rows()[draw_index(g, n)]);
      }
      for (const Observation& o : rows) ++out.part_counts(b, o.p == 0 ? 0 : 1);
      try {
        const PartialNestDataset resampled = PartialNestDataset::from_rows(
            rows, data.covariate_names(), data.outcome_kind());
        const NuisanceSet nuis = fit_nuisances(resampled, spec);
        for (int k = 0; k < 4; ++k) {
          const PointEstimates pe =
              point_estimates(resampled, nuis, static_cast<EstimatorKind>(k), est_opts);
          out.est(b, 3 * k) = pe.psi0;
          out.est(b, 3 * k + 1) = pe.psi1;
          out.est(b, 3 * k + 2) = pe.ate;
        }
        ok[b] = 1;
      } catch (const Error&) {
        // failed replicate: row stays NaN and is counted below
      }
    }
  };

  const int workers = std::max(1, std::min(opts.threads, opts.B));
  if (workers == 1) {
    run_range(0, opts.B);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (opts.B + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b0 = w * chunk, b1 = std::min(opts.B, b0 + chunk);
      if (b0 < b1) pool.emplace_back(run_range, b0, b1);
    }
    for (auto& t : pool) t.join();
  }

  for (int b = 0; b < opts.B; ++b)
    if (!ok[b]) ++out.failed;
  if (out.failed > 0.05 * opts.B)
    throw Error(ErrorCode::TooManyFailedReplicates,
                std::to_string(out.failed) + " of " + std::to_string(opts.B) +
                    " bootstrap replicates failed");
  return out;
}

BootstrapResult bootstrap_extract(const BootstrapReplicates& reps, EstimatorKind kind,
                                  const PointEstimates& center) {
  const int col0 = 3 * static_cast<int>(kind);
  BootstrapResult res;
  res.requested = reps.requested;
  res.failed = reps.failed;
  res.completed = reps.requested - reps.failed;

  const double centers[3] = {center.psi0, center.psi1, center.ate};
  IntervalEstimate* normal[3] = {&res.psi0_normal, &res.psi1_normal, &res.ate_normal};
  IntervalEstimate* pct[3] = {&res.psi0_percentile, &res.psi1_percentile, &res.ate_percentile};
  for (int q = 0; q < 3; ++q) {
    std::vector<double> v;
    v.reserve(res.completed);
    for (int b = 0; b < reps.requested; ++b) {
      const double val = reps.est(b, col0 + q);
      if (!std::isnan(val)) v.push_back(val);
    }
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (static_cast<double>(v.size()) - 1.0)) : 0.0;

    normal[q]->point = centers[q];
    normal[q]->se = se;
    normal[q]->lower = centers[q] - kZ95 * se;
    normal[q]->upper = centers[q] + kZ95 * se;
    normal[q]->method = "bootstrap_normal";

    pct[q]->point = centers[q];
    pct[q]->se = se;
    pct[q]->lower = quantile(v, 0.025);
    pct[q]->upper = quantile(v, 0.975);
    pct[q]->method = "bootstrap_percentile";
  }
  return res;
}

BootstrapResult bootstrap(const PartialNestDataset& data, const NuisanceSpec& spec,
                          const EstimationOptions& est_opts, EstimatorKind kind,
                          const BootstrapOptions& opts) {
  const NuisanceSet nuis = fit_nuisances(data, spec);
  const PointEstimates center = point_estimates(data, nuis, kind, est_opts);
  const BootstrapReplicates reps = bootstrap_replicates(data, spec, est_opts, opts);
  return bootstrap_extract(reps, kind, center);
}

}  // namespace pnest
