#pragma once

// Transition densities p_t and the small-jump densities pbar_t (with spatial
// derivatives) by Fourier inversion on periodic grids, with a certified
// frequency-truncation bound.

#include <complex>
#include <optional>
#include <ostream>
#include <vector>

#include "levykb/exponents.hpp"
#include "levykb/measure.hpp"

namespace levykb {

enum class DensityKind { Full, Bar };

struct DensityOptions {
  double rel_trunc = 1e-10;  // tail bound relative to max |values|
  double alias_tol = 1e-10;  // periodic image bound relative to rho_t^{k+1}
  std::optional<GrowthConstants> growth;
  std::optional<double> rho_t;  // reuse a known scale
  bool use_cache = true;        // honour LEVYKB_CACHE
};

struct DensityGrid {
  DensityKind which = DensityKind::Full;
  double t = 0.0;
  int k = 0;
  std::vector<double> x;
  std::vector<double> values;
  double rho_t = 0.0;
  double trunc_freq = 0.0;  // Xi
  double tail_bound = 0.0;
  double alias_bound = 0.0;
  double period = 0.0;      // L of the periodic grid
  std::size_t fft_size = 0;  // transform length; 0 for direct summation
  double dropped_mass = 0.0; // explicit far-jump law mass not represented
  double imag_residue = 0.0;
  std::optional<double> x_t;
};

DensityGrid density(const LevyMeasure& mu, double t, const std::vector<double>& x, int k = 0,
                    const DensityOptions& opts = {});
DensityGrid density_bar(const LevyMeasure& mu, double t, const std::vector<double>& x, int k = 0,
                        const DensityOptions& opts = {});

/// Pointwise values of the same trapezoid sum that produced a grid (same
/// period, cutoff and spectrum), for off-grid refinement.
class DensityEvaluator {
 public:
  DensityEvaluator(const LevyMeasure& mu, const DensityGrid& g, const DensityOptions& opts = {});
  double operator()(double x) const;

 private:
  double h_ = 0.0;
  int k_ = 0;
  std::vector<std::complex<double>> w_;
};

/// Smallest grid point attaining max pbar_t, refined by golden section on the
/// neighbouring cells. Throws MaxOnBoundary if the max sits on a grid end.
double locate_xt(const LevyMeasure& mu, const DensityGrid& bar, const DensityOptions& opts = {});

struct ConvolutionCheck {
  double max_deviation = 0.0;
  double max_density = 0.0;
  double relative = 0.0;  // max_deviation / max_density
  int m_max = 0;
  double poisson_tail = 0.0;
  double dropped_mass = 0.0;
};

/// sup |p_t - pbar_t * P_t * delta_{-a_t}| on the grid. The right side is
/// assembled spectrally from psi_t and the characteristic function of the
/// truncated P_t (explicit atoms for atomic measures).
ConvolutionCheck convolution_check(const LevyMeasure& mu, double t, const std::vector<double>& x,
                                   int m_max = -1, const DensityOptions& opts = {});

void write_density_csv(const DensityGrid& g, std::ostream& os, bool header = true);

}  // namespace levykb
