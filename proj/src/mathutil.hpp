#pragma once

#include <vector>

namespace pnest {

double expit(double z);

// log(1 + exp(z)) without overflow for large |z|
double log1pexp(double z);

// Linearly interpolated quantile (the common "type 7" definition),
// prob in [0, 1]. Sorts a copy of the input.
double quantile(std::vector<double> v, double prob);

// Survival function of the chi-square distribution with 2 degrees of
// freedom: exp(-x/2).
double chi2_sf_2df(double x);

// Two-sided standard normal tail probability 2*(1 - Phi(|z|)).
double normal_two_sided_p(double z);

}  // namespace pnest
