#pragma once

// Quasi-inverse time scales rho_t, rho_t^U, rho_t^L.

#include <ostream>
#include <string>
#include <vector>

#include "levykb/measure.hpp"

namespace levykb {

enum class ScaleKind { Re, Upper, Lower };

struct ScaleResult {
  double value = 0.0;          // inf{xi > 0 : f(xi) >= 1/t}, upper end of the final bracket
  double bracket_width = 0.0;  // width of the final bracket
  double f_value = 0.0;        // f(value)
};

/// Bracket [1e-8, 2^k] with 2^k <= 2^200 found by doubling; the first crossing
/// is located by a log scan (plus left limits at atom thresholds) and refined
/// by bisection to 1e-10 relative in f.
ScaleResult scale(const LevyMeasure& mu, double t, ScaleKind kind);
double rho(const LevyMeasure& mu, double t);
double rho_U(const LevyMeasure& mu, double t);
double rho_L(const LevyMeasure& mu, double t);

struct ScaleTable {
  std::vector<double> t;
  std::vector<double> rho, rho_U, rho_L;
  std::vector<double> bracket_width, bracket_width_U, bracket_width_L;
};

ScaleTable scale_table(const LevyMeasure& mu, const std::vector<double>& t_grid);
/// Default t grid: 25 log-spaced points on [1e-6, 1].
std::vector<double> default_scale_grid();

struct ComparabilityRow {
  std::string pair;  // e.g. "rho_ct/rho_t", "rho_U/rho"
  double c = 1.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

struct ComparabilityReport {
  std::vector<ComparabilityRow> rows;
  bool pass = false;  // every ratio finite and positive
};

ComparabilityReport comparability_report(const LevyMeasure& mu, const std::vector<double>& t_grid,
                                         const std::vector<double>& c_list);

void write_scale_csv(const ScaleTable& table, std::ostream& os);

}  // namespace levykb
