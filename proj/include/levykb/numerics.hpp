#pragma once

// Numerical building blocks shared by the modules: Gauss-Kronrod panels,
// Wynn epsilon acceleration, special functions of the power-law measure,
// log-domain spline caches and a few grid helpers.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace levykb::numerics {

using RealFn = std::function<double(double)>;

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Single 15-point Kronrod panel with the embedded 7-point Gauss estimate as
/// error. Non-adaptive; callers split at known breakpoints.
QuadResult gk15(const RealFn& f, double a, double b);

/// Globally adaptive Gauss-Kronrod on [a, b]: the panel with the largest error
/// is bisected until the tolerance (or the round-off floor) is met. Throws
/// QuadratureFailure past max_depth bisections of one panel.
QuadResult integrate(const RealFn& f, double a, double b, double rel_tol = 1e-12,
                     double abs_tol = 0.0, unsigned max_depth = 30);

/// Wynn epsilon table over a sequence of partial sums.
class WynnEpsilon {
 public:
  void push(double partial_sum);
  double estimate() const { return estimate_; }
  double error() const { return error_; }
  std::size_t size() const { return count_; }

 private:
  std::vector<double> row_;
  double estimate_ = 0.0;
  double error_ = 1e300;
  double last_estimate_ = 0.0;
  double prev_estimate_ = 0.0;
  std::size_t count_ = 0;
};

/// K_alpha(inf) = int_0^inf (1 - cos v) v^{-1-alpha} dv.
double cos_kernel_total(double alpha);

/// K_alpha(s) = int_0^s (1 - cos v) v^{-1-alpha} dv.
double cos_kernel_partial(double alpha, double s);

/// J_alpha(s) = int_s^inf cos(v) v^{-1-alpha} dv, s > 0.
double cos_tail_integral(double alpha, double s);

/// E_p(z) = int_1^inf e^{-z tau} tau^{-p} dtau by continued fraction, |z| >= 1.
std::complex<double> expint_cf(double p, std::complex<double> z);

/// Upper incomplete gamma Gamma(a, x) (not regularized).
double upper_gamma(double a, double x);

/// sum_{m > m_max} lambda^m / m!  (without the e^{-lambda} factor).
double poisson_series_tail(double lambda, int m_max);

/// Smallest m with poisson_series_tail(lambda, m) <= tol * scale.
int poisson_terms_for(double lambda, double tol, double scale, int cap = 400);

/// Full linear convolution (size a + b - 1) through a real FFT.
std::vector<double> linear_convolve(const std::vector<double>& a, const std::vector<double>& b);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

std::vector<double> logspace(double lo, double hi, std::size_t n);
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Cubic B-spline of ln f against ln x on a uniform ln x grid, for strictly
/// positive f. Power-law extrapolation outside the sampled range.
class LogLogSpline {
 public:
  LogLogSpline() = default;
  LogLogSpline(const RealFn& f, double x_lo, double x_hi, double per_decade);
  LogLogSpline(std::vector<double> log_values, double x_lo, double log_step);

  double operator()(double x) const;
  bool empty() const { return log_values_.empty(); }
  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  double log_step() const { return step_; }
  std::span<const double> log_values() const { return log_values_; }

 private:
  void build();
  std::vector<double> log_values_;
  std::vector<double> coef_;
  double x_lo_ = 0.0, x_hi_ = 0.0, step_ = 0.0, lx0_ = 0.0;
  double slope_lo_ = 0.0, slope_hi_ = 0.0;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace levykb::numerics
