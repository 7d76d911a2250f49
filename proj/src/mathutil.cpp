#include "mathutil.hpp"

#include <algorithm>
#include <cmath>

namespace pnest {

double expit(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

double log1pexp(double z) {
  if (z > 35.0) return z;
  if (z < -35.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  if (n == 1) return v[0];
  double h = prob * static_cast<double>(n - 1);
  auto lo = static_cast<size_t>(h);
  if (lo >= n - 1) return v[n - 1];
  double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double chi2_sf_2df(double x) { return std::exp(-0.5 * x); }

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace pnest
