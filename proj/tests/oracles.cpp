#include "oracles.hpp"

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace oracle {

namespace {

double expit_ref(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd logistic_newton(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, int max_iter,
                                double tol) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(F.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = F * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (int i = 0; i < eta.size(); ++i) {
      mu(i) = expit_ref(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::MatrixXd H = F.transpose() * w.asDiagonal() * F;
    const Eigen::VectorXd g = F.transpose() * (y - mu);
    const Eigen::VectorXd delta = H.colPivHouseholderQr().solve(g);
    beta += delta;
    if (delta.cwiseAbs().maxCoeff() < tol) break;
  }
  return beta;
}

Eigen::VectorXd ols_gram(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd gram = F.transpose() * F;
  return gram.inverse() * (F.transpose() * y);
}

StratifiedMeans stratified_standardization(const Eigen::MatrixXd& x, const Eigen::VectorXi& p,
                                           const Eigen::VectorXi& s, const Eigen::VectorXi& a,
                                           const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.rows());
  auto pattern = [&x](int i) {
    std::vector<double> key(x.cols());
    for (int j = 0; j < x.cols(); ++j) key[j] = x(i, j);
    return key;
  };
  std::map<std::vector<double>, std::array<double, 4>> cells;  // sum0, n0, sum1, n1
  for (int i = 0; i < n; ++i) {
    if (s(i) != 1) continue;
    auto& c = cells[pattern(i)];
    if (a(i) == 0) {
      c[0] += y(i);
      c[1] += 1;
    } else if (a(i) == 1) {
      c[2] += y(i);
      c[3] += 1;
    }
  }
  StratifiedMeans out;
  int n_target = 0;
  for (int i = 0; i < n; ++i) {
    if (p(i) != 0) continue;
    auto it = cells.find(pattern(i));
    if (it == cells.end() || it->second[1] == 0 || it->second[3] == 0)
      throw std::runtime_error("target row has an empty trial cell");
    out.psi0 += it->second[0] / it->second[1];
    out.psi1 += it->second[2] / it->second[3];
    ++n_target;
  }
  if (n_target == 0) throw std::runtime_error("no target rows");
  out.psi0 /= n_target;
  out.psi1 /= n_target;
  return out;
}

GaussHermite gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(i / 2.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  gh.nodes = es.eigenvalues();
  gh.weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    gh.weights(i) = sqrt_pi * v0 * v0;
  }
  return gh;
}

double expit_normal_mean(double c0, const Eigen::VectorXd& slopes, int n_nodes) {
  const int d = static_cast<int>(slopes.size());
  const GaussHermite gh = gauss_hermite(n_nodes);
  const double sqrt2 = std::sqrt(2.0);
  std::vector<int> idx(d, 0);
  double total = 0.0;
  while (true) {
    double eta = c0, wprod = 1.0;
    for (int k = 0; k < d; ++k) {
      eta += slopes(k) * sqrt2 * gh.nodes(idx[k]);
      wprod *= gh.weights(idx[k]);
    }
    total += wprod * expit_ref(eta);
    int k = 0;
    while (k < d && ++idx[k] == n_nodes) {
      idx[k] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return total / std::pow(M_PI, d / 2.0);
}

}  // namespace oracle
