#pragma once

// Small/big jump split at radius 1/rho_t: Z_t = Zbar_t + Zhat_t - a_t with
// Zhat_t compound Poisson of intensity Lambda_t = t mu restricted to |u| > 1/rho_t.

#include <complex>
#include <vector>

#include "json.hpp"
#include "levykb/measure.hpp"

namespace levykb {

struct Decomposition {
  LevyMeasure mu;
  double t = 0.0;
  double rho_t = 0.0;
  double radius = 0.0;  // 1/rho_t
  double lambda_total = 0.0;
  double a_t = 0.0;
  /// Lambda_t atoms (weights include the factor t); atomic measures only.
  std::vector<Atom> atoms;
};

Decomposition build_decomposition(const LevyMeasure& mu, double t);
Decomposition build_decomposition(const LevyMeasure& mu, double t, double rho_t);

/// psi_t(xi) = t int_{|u| <= 1/rho_t} (1 - e^{i xi u} + i xi u) mu(du).
std::complex<double> psi_t(const Decomposition& dec, double xi);
/// Lambda_t-hat(xi) = t int_{|u| > 1/rho_t} e^{i xi u} mu(du).
std::complex<double> lambda_t_hat(const Decomposition& dec, double xi);
/// Characteristic function of P_t: exp(Lambda_t-hat(xi) - Lambda_t(R)).
std::complex<double> poisson_cf(const Decomposition& dec, double xi);

/// Uniform grid measure: mass[i] sits at x0 + i dx.
struct GridMeasure {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> mass;
  double position(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
};

/// Cell masses of Lambda_t on cells of width dx centred at k dx, |k dx| <= half_width.
GridMeasure lambda_cells(const Decomposition& dec, double dx, double half_width);

struct PoissonOptions {
  double tol = 1e-12;          // admissible dropped Poisson tail mass
  double window = 0.0;         // half-width kept for positions; 0 = automatic
  double dx = 0.0;             // grid step for density measures; 0 = automatic
  double prune_weight = 1e-18; // atoms lighter than this are dropped
  bool keep_terms = false;     // keep every m-term separately (atomic only)
};

struct PoissonLaw {
  int m_max = 0;
  double lambda_total = 0.0;
  double tail_bound = 0.0;            // e^{-Lambda} sum_{m > m_max} Lambda^m / m!
  std::vector<double> term_mass;      // e^{-Lambda} Lambda^m / m!
  std::vector<Atom> atoms;            // atomic: combined law (delta_0 included)
  std::vector<std::vector<Atom>> terms;  // per-m atom lists when keep_terms
  GridMeasure grid;                   // density: combined law for m >= 1
  double delta0 = 0.0;                // e^{-Lambda}, the m = 0 point mass
  double dropped_mass = 0.0;          // pruned or outside the window
};

/// Smallest m_max with dropped Poisson tail <= tol.
int poisson_m_max(double lambda_total, double tol);

/// Truncated P_t. Throws TruncationInsufficient when the tail at m_max exceeds opts.tol.
PoissonLaw poisson_law(const Decomposition& dec, int m_max, const PoissonOptions& opts = {});

nlohmann::json decomposition_to_json(const Decomposition& dec);

}  // namespace levykb
