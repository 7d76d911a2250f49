#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "error.hpp"

namespace pnest {

enum class ModelKind { logistic, linear };

struct FittedModel {
  ModelKind kind = ModelKind::logistic;
  Eigen::VectorXd coef;  // intercept first
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  std::string subset_description;
  std::vector<double> loglik_trace;  // logistic fits only, one entry per accepted step
};

// Bernoulli-logit MLE by iteratively reweighted least squares with
// step-halving; converged means gradient max-norm <= 1e-8 within 50
// iterations. A converged fit gets one extra full Newton step so score
// equations hold to near machine precision.
FittedModel fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                         const std::string& subset_description = "");

// Ordinary least squares via column-pivoted QR.
FittedModel fit_linear(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                       const std::string& subset_description = "");

// Probabilities for logistic models, linear predictor for linear ones.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& features);

// Observed information F' diag(mu(1-mu)) F at the given coefficients.
Eigen::MatrixXd logistic_information(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& coef);

}  // namespace pnest
