#pragma once

// Characteristic exponent, the proxies psi^L / psi^U, and the condition-A
// constant beta estimated on frequency grids.

#include <ostream>
#include <string>
#include <vector>

#include "levykb/measure.hpp"

namespace levykb {

extern const char* const kConditionACaveat;

/// int L(xi u) mu(du) with L(x) = x^2 1_{|x|<1}.
double psi_L(const LevyMeasure& mu, double xi);
/// int U(xi u) mu(du) with U(x) = x^2 ^ 1.
double psi_U(const LevyMeasure& mu, double xi);

struct BetaEstimate {
  double beta_hat = 0.0;
  double argmax_xi = 0.0;
  double xi_lo = 0.0, xi_hi = 0.0;  // final (possibly extended) grid range
  int extensions_low = 0, extensions_high = 0;
  bool growing_low = false, growing_high = false;
  std::string caveat = kConditionACaveat;
};

struct ExponentProfile {
  std::vector<double> xi;
  std::vector<double> re_psi, im_psi, psi_L, psi_U;
  BetaEstimate beta;
  double c_floor = 0.0;
};

/// Default magnitude grid: log-spaced on [1e-3, 1e6], 60 per decade.
std::vector<double> default_beta_grid();

/// beta_hat = max psi^U/psi^L over the positive grid, with two-decade
/// extensions while the boundary ratio is within 5% of the running max.
/// Throws ConditionAViolated when the ratio keeps growing on an extension.
BetaEstimate estimate_beta(const LevyMeasure& mu, const std::vector<double>& xi_grid);

/// min over |xi| >= 1 of Re psi(xi) / |xi|^{2/beta_hat}.
double growth_floor(const LevyMeasure& mu, double beta_hat, const std::vector<double>& xi_grid);

/// Profile on the grid mirrored about 0 (0 included); magnitudes must be > 0.
ExponentProfile exponent_profile(const LevyMeasure& mu, const std::vector<double>& magnitudes);

struct GrowthConstants {
  double beta_hat = 0.0;
  double c_floor = 0.0;
};

/// beta_hat and c_floor on the default grid, memoized per measure hash.
GrowthConstants growth_constants(const LevyMeasure& mu);

void write_profile_csv(const ExponentProfile& p, std::ostream& os);

}  // namespace levykb
