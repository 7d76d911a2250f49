#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"
#include "simulation.hpp"

namespace fixtures {

// Twelve rows over a single binary covariate. Every (x, a) cell in the trial
// holds at least two rows with both outcome values represented somewhere, so
// saturated logistic fits stay interior. Cell means:
//   x=0: arm0 {0,1} -> 1/2, arm1 {1,0} -> 1/2
//   x=1: arm0 {1,0,1} -> 2/3, arm1 {1,0,1} -> 2/3
// Target part has 3 rows with x=0 and 5 with x=1, so the standardized value
// for both arms is (3*(1/2) + 5*(2/3)) / 8 = 29/48.
inline std::vector<pnest::Observation> saturated_rows() {
  auto row = [](double x, int p, int s, int a, double y) {
    pnest::Observation o;
    o.x = {x};
    o.p = p;
    o.s = s;
    if (s == 1) {
      o.a = a;
      o.y = y;
    }
    return o;
  };
  return {
      row(0, 0, 0, -1, 0),
      row(0, 1, 1, 0, 0),
      row(0, 0, 1, 0, 1),
      row(0, 1, 1, 1, 1),
      row(0, 0, 1, 1, 0),
      row(1, 0, 0, -1, 0),
      row(1, 1, 1, 0, 1),
      row(1, 0, 1, 0, 0),
      row(1, 0, 1, 0, 1),
      row(1, 1, 1, 1, 1),
      row(1, 0, 1, 1, 0),
      row(1, 0, 1, 1, 1),
  };
}

inline pnest::PartialNestDataset saturated_dataset() {
  return pnest::PartialNestDataset::from_rows(saturated_rows(), {"x1"},
                                              pnest::OutcomeKind::binary);
}

// One realized draw from the benchmark generative process, after the design
// filter. Roughly 525 rows with three covariates.
inline pnest::PartialNestDataset simulated_dataset(
    std::uint64_t seed, pnest::OutcomeKind kind = pnest::OutcomeKind::binary,
    pnest::ScenarioLabel label = pnest::ScenarioLabel::no_em) {
  pnest::Scenario sc = pnest::Scenario::make(label, kind);
  std::mt19937_64 gen = pnest::make_stream(seed, 1, 0x47454E44ULL);
  pnest::FullCohort cohort = pnest::generate_full_cohort(sc, gen);
  return pnest::induce_partial_nesting(cohort);
}

}  // namespace fixtures
