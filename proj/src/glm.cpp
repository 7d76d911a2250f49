#include "glm.hpp"

#include <cmath>

#include "mathutil.hpp"

namespace pnest {

namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxIter = 50;
constexpr int kMaxHalvings = 10;
constexpr double kSeparationBound = 30.0;

double loglik(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  const Eigen::VectorXd eta = F * beta;
  for (int i = 0; i < F.rows(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  return ll;
}

Eigen::VectorXd mu_of(const Eigen::MatrixXd& F, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = F * beta;
  for (int i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
  return eta;
}

void check_inputs(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
  if (F.rows() != y.size())
    throw Error(ErrorCode::DimensionMismatch,
                "feature rows (" + std::to_string(F.rows()) + ") != response length (" +
                    std::to_string(y.size()) + ")");
  if (F.rows() < 2)
    throw Error(ErrorCode::InvariantViolation, "need at least 2 rows to fit");
}

}  // namespace

FittedModel fit_logistic(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                         const std::string& desc) {
  check_inputs(F, y);
  const double y0 = y(0);
  if ((y.array() == y0).all())
    throw Error(ErrorCode::OneClassResponse,
                desc.empty() ? "response takes a single value" : desc + ": response takes a single value");

  const int k = static_cast<int>(F.cols());
  FittedModel m;
  m.kind = ModelKind::logistic;
  m.subset_description = desc;
  m.coef = Eigen::VectorXd::Zero(k);

  double ll = loglik(F, y, m.coef);
  m.loglik_trace.push_back(ll);

  auto newton_delta = [&](const Eigen::VectorXd& beta, const Eigen::VectorXd& grad) {
    const Eigen::VectorXd mu = mu_of(F, beta);
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    const Eigen::MatrixXd H = F.transpose() * w.asDiagonal() * F;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success)
      throw Error(ErrorCode::SingularInformation,
                  desc.empty() ? "information matrix is singular" : desc + ": information matrix is singular");
    Eigen::VectorXd delta = ldlt.solve(grad);
    if (!delta.allFinite() || (H * delta - grad).norm() > 1e-6 * (1.0 + grad.norm()))
      throw Error(ErrorCode::SingularInformation,
                  desc.empty() ? "information matrix is singular" : desc + ": information matrix is singular");
    return delta;
  };

  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Eigen::VectorXd mu = mu_of(F, m.coef);
    const Eigen::VectorXd grad = F.transpose() * (y - mu);
    m.final_gradient_norm = grad.cwiseAbs().maxCoeff();
    if (m.final_gradient_norm <= kGradTol) {
      m.converged = true;
      break;
    }
    const Eigen::VectorXd delta = newton_delta(m.coef, grad);
    double lambda = 1.0;
    Eigen::VectorXd cand;
    double ll_cand = 0.0;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      cand = m.coef + lambda * delta;
      ll_cand = loglik(F, y, cand);
      if (ll_cand >= ll - 1e-12 * (1.0 + std::abs(ll))) break;
      lambda *= 0.5;
    }
    m.coef = cand;
    ll = ll_cand;
    m.loglik_trace.push_back(ll);
    ++m.iterations;
    if (m.coef.cwiseAbs().maxCoeff() > kSeparationBound)
      throw Error(ErrorCode::SeparationDetected,
                  (desc.empty() ? std::string("") : desc + ": ") +
                      "coefficient magnitude exceeded " + std::to_string(kSeparationBound) +
                      " during iteration (data may be separable)");
  }

  if (!m.converged)
    m.final_gradient_norm = (F.transpose() * (y - mu_of(F, m.coef))).cwiseAbs().maxCoeff();

  if (m.converged) {
    // one full Newton polish so downstream algebraic identities hold to
    // near machine precision
    const Eigen::VectorXd mu = mu_of(F, m.coef);
    const Eigen::VectorXd grad = F.transpose() * (y - mu);
    try {
      const Eigen::VectorXd polished = m.coef + newton_delta(m.coef, grad);
      const Eigen::VectorXd g2 = F.transpose() * (y - mu_of(F, polished));
      const double norm2 = g2.cwiseAbs().maxCoeff();
      if (polished.allFinite() && norm2 <= m.final_gradient_norm) {
        m.coef = polished;
        m.final_gradient_norm = norm2;
      }
    } catch (const Error&) {
      // keep the converged iterate when the polish solve is degenerate
    }
  }
  return m;
}

FittedModel fit_linear(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                       const std::string& desc) {
  check_inputs(F, y);
  if (F.rows() < F.cols())
    throw Error(ErrorCode::RankDeficient,
                (desc.empty() ? std::string("") : desc + ": ") + "fewer rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
  if (qr.rank() < F.cols())
    throw Error(ErrorCode::RankDeficient,
                (desc.empty() ? std::string("") : desc + ": ") + "feature matrix is rank deficient");
  FittedModel m;
  m.kind = ModelKind::linear;
  m.subset_description = desc;
  m.coef = qr.solve(y);
  m.converged = true;
  m.iterations = 1;
  m.final_gradient_norm = (F.transpose() * (y - F * m.coef)).cwiseAbs().maxCoeff();
  return m;
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& F) {
  if (F.cols() != model.coef.size())
    throw Error(ErrorCode::DimensionMismatch,
                "feature columns (" + std::to_string(F.cols()) + ") != coefficient length (" +
                    std::to_string(model.coef.size()) + ")");
  Eigen::VectorXd eta = F * model.coef;
  if (model.kind == ModelKind::linear) return eta;
  for (int i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
  return eta;
}

Eigen::MatrixXd logistic_information(const Eigen::MatrixXd& F, const Eigen::VectorXd& coef) {
  if (F.cols() != coef.size())
    throw Error(ErrorCode::DimensionMismatch, "feature/coefficient dimension mismatch");
  Eigen::VectorXd eta = F * coef;
  for (int i = 0; i < eta.size(); ++i) {
    const double mu = expit(eta(i));
    eta(i) = mu * (1.0 - mu);
  }
  return F.transpose() * eta.asDiagonal() * F;
}

}  // namespace pnest
