#include "levykb/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <cstdio>
#include <queue>
#include <string>

#include <boost/math/special_functions/gamma.hpp>
#include <fftw3.h>

#include "levykb/error.hpp"

namespace levykb {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::FiniteActivity: return "FiniteActivity";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::ConditionAViolated: return "ConditionAViolated";
    case ErrorCode::FloorViolated: return "FloorViolated";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::TruncationUnreachable: return "TruncationUnreachable";
    case ErrorCode::TruncationInsufficient: return "TruncationInsufficient";
    case ErrorCode::MaxOnBoundary: return "MaxOnBoundary";
    case ErrorCode::NoFiniteConstants: return "NoFiniteConstants";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::DeltaTooCoarse: return "DeltaTooCoarse";
    case ErrorCode::GridCoverageInsufficient: return "GridCoverageInsufficient";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

namespace numerics {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace

namespace {

QuadResult gk15_abs(const RealFn& f, double a, double b, double& absval) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  double resabs = std::abs(fc) * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    resk += kWgk[j] * (f1 + f2);
    resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  absval = resabs * std::abs(h);
  return {resk * h, std::abs((resk - resg) * h)};
}

}  // namespace

QuadResult gk15(const RealFn& f, double a, double b) {
  double absval = 0.0;
  return gk15_abs(f, a, b, absval);
}

QuadResult integrate(const RealFn& f, double a, double b, double rel_tol, double abs_tol,
                     unsigned max_depth) {
  if (a == b) return {};
  struct Piece {
    double a, b, value, error, absval;
    unsigned depth;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  const auto panel = [&](double lo, double hi, unsigned depth) {
    double absval = 0.0;
    const auto r = gk15_abs(f, lo, hi, absval);
    return Piece{lo, hi, r.value, r.error, absval, depth};
  };
  std::priority_queue<Piece> heap;
  heap.push(panel(a, b, 0));
  double value = heap.top().value, error = heap.top().error, absval = heap.top().absval;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr std::size_t kMaxPieces = 5000;
  while (true) {
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::QuadratureFailure, "non-finite integral on [" + sci(a) + ", " + sci(b) + "]");
    }
    const double target = std::max(abs_tol, rel_tol * std::abs(value));
    if (error <= target || error <= 50.0 * kEps * absval) break;
    Piece worst = heap.top();
    if (worst.depth >= max_depth || heap.size() >= kMaxPieces) {
      throw Error(ErrorCode::QuadratureFailure,
                  "error estimate " + sci(error) + " above target " + sci(target) +
                      " on [" + sci(a) + ", " + sci(b) + "] after " + std::to_string(heap.size()) +
                      " subintervals, depth " + std::to_string(worst.depth));
    }
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Piece left = panel(worst.a, mid, worst.depth + 1);
    const Piece right = panel(mid, worst.b, worst.depth + 1);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    absval += left.absval + right.absval - worst.absval;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of incremental updates.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error};
}

void WynnEpsilon::push(double s) {
  constexpr std::size_t kMaxColumns = 25;
  ++count_;
  std::vector<double> next(std::min(row_.size() + 1, kMaxColumns));
  next[0] = s;
  for (std::size_t k = 0; k + 1 < next.size(); ++k) {
    const double diff = next[k] - row_[k];
    if (diff == 0.0 || !std::isfinite(diff)) {
      next.resize(k + 1);
      break;
    }
    const double prev = k == 0 ? 0.0 : row_[k - 1];
    next[k + 1] = prev + 1.0 / diff;
  }
  row_ = std::move(next);
  const std::size_t top = (row_.size() - 1) & ~std::size_t{1};
  const double est = row_[top];
  if (count_ >= 3) {
    error_ = std::abs(est - last_estimate_) + std::abs(est - prev_estimate_);
  }
  prev_estimate_ = last_estimate_;
  last_estimate_ = est;
  estimate_ = est;
}

double cos_kernel_total(double alpha) {
  return std::numbers::pi / (2.0 * std::tgamma(1.0 + alpha) * std::sin(std::numbers::pi * alpha / 2));
}

double cos_kernel_partial(double alpha, double s) {
  if (s <= 0.0) return 0.0;
  if (s < 2.0) {
    // Alternating series of (1 - cos v) v^{-1-alpha}.
    double sum = 0.0;
    double pw = s * s;  // s^{2j}
    double fact = 2.0;  // (2j)!
    for (int j = 1; j < 40; ++j) {
      const double term = pw / (fact * (2.0 * j - alpha));
      sum += (j % 2 == 1) ? term : -term;
      if (term < 1e-18 * std::abs(sum)) break;
      pw *= s * s;
      fact *= (2.0 * j + 1) * (2.0 * j + 2);
    }
    return sum * std::pow(s, -alpha);
  }
  return cos_kernel_total(alpha) - std::pow(s, -alpha) / alpha + cos_tail_integral(alpha, s);
}

std::complex<double> expint_cf(double p, std::complex<double> z) {
  using C = std::complex<double>;
  constexpr double tiny = 1e-300;
  C b = z + p;
  C c = 1.0 / tiny;
  C d = 1.0 / b;
  C h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (p - 1.0 + i);
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const C del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) return h * std::exp(-z);
  }
  throw Error(ErrorCode::QuadratureFailure, "expint continued fraction did not converge");
}

double cos_tail_integral(double alpha, double s) {
  if (s <= 0.0) throw Error(ErrorCode::InvalidParameters, "cos_tail_integral needs s > 0");
  if (s < 2.0) {
    return cos_kernel_partial(alpha, s) - cos_kernel_total(alpha) + std::pow(s, -alpha) / alpha;
  }
  const auto e = expint_cf(1.0 + alpha, std::complex<double>(0.0, -s));
  return std::pow(s, -alpha) * e.real();
}

double upper_gamma(double a, double x) {
  if (x <= 0.0) return std::tgamma(a);
  return boost::math::tgamma(a, x);
}

double poisson_series_tail(double lambda, int m_max) {
  if (lambda <= 0.0) return 0.0;
  // Terms beyond m_max, summed until negligible.
  double term = 1.0;
  for (int m = 1; m <= m_max + 1; ++m) term *= lambda / m;
  double sum = 0.0;
  for (int m = m_max + 1; m < m_max + 2000; ++m) {
    sum += term;
    term *= lambda / (m + 1);
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

int poisson_terms_for(double lambda, double tol, double scale, int cap) {
  for (int m = 0; m <= cap; ++m) {
    if (poisson_series_tail(lambda, m) <= tol * scale) return m;
  }
  throw Error(ErrorCode::TruncationInsufficient,
              "Poisson series needs more than " + std::to_string(cap) + " terms");
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> linear_convolve(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_n = a.size() + b.size() - 1;
  if (std::min(a.size(), b.size()) <= 32) {
    std::vector<double> out(out_n, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  }
  const std::size_t n = next_pow2(out_n);
  const std::size_t nc = n / 2 + 1;
  std::vector<double> buf(n);
  auto* fa = fftw_alloc_complex(nc);
  auto* fb = fftw_alloc_complex(nc);
  fftw_plan pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), fa, FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), fb, FFTW_ESTIMATE);
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(a.begin(), a.end(), buf.begin());
  fftw_execute(pa);
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(b.begin(), b.end(), buf.begin());
  fftw_execute(pb);
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re / static_cast<double>(n);
    fa[k][1] = im / static_cast<double>(n);
  }
  fftw_plan back = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, buf.data(), FFTW_ESTIMATE);
  fftw_execute(back);
  fftw_destroy_plan(pa);
  fftw_destroy_plan(pb);
  fftw_destroy_plan(back);
  fftw_free(fa);
  fftw_free(fb);
  return {buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(out_n)};
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

// Natural cubic interpolation on a uniform grid, coefficients solved once.
LogLogSpline::LogLogSpline(const RealFn& f, double x_lo, double x_hi, double per_decade) {
  const double span = std::log10(x_hi / x_lo);
  const auto n = static_cast<std::size_t>(std::ceil(span * per_decade)) + 1;
  step_ = std::log(x_hi / x_lo) / static_cast<double>(n - 1);
  x_lo_ = x_lo;
  lx0_ = std::log(x_lo);
  log_values_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = f(std::exp(lx0_ + step_ * i));
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::Internal, "LogLogSpline needs positive samples");
    }
    log_values_[i] = std::log(v);
  }
  build();
}

LogLogSpline::LogLogSpline(std::vector<double> log_values, double x_lo, double log_step)
    : log_values_(std::move(log_values)), x_lo_(x_lo), step_(log_step), lx0_(std::log(x_lo)) {
  build();
}

void LogLogSpline::build() {
  const std::size_t n = log_values_.size();
  if (n < 4) throw Error(ErrorCode::Internal, "LogLogSpline needs at least 4 samples");
  x_hi_ = std::exp(lx0_ + step_ * static_cast<double>(n - 1));
  // Second derivatives with not-a-knot-free natural ends via tridiagonal solve.
  std::vector<double> m(n, 0.0), cp(n, 0.0), dp(n, 0.0);
  const auto& y = log_values_;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (step_ * step_);
    const double denom = 4.0 - cp[i - 1];
    cp[i] = 1.0 / denom;
    dp[i] = (rhs - dp[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = dp[i] - cp[i] * m[i + 1];
    if (i == 1) break;
  }
  coef_ = std::move(m);
  slope_lo_ = (y[1] - y[0]) / step_ - step_ * (2.0 * coef_[0] + coef_[1]) / 6.0;
  slope_hi_ = (y[n - 1] - y[n - 2]) / step_ + step_ * (coef_[n - 2] + 2.0 * coef_[n - 1]) / 6.0;
}

double LogLogSpline::operator()(double x) const {
  const double lx = std::log(x);
  const std::size_t n = log_values_.size();
  const double u = (lx - lx0_) / step_;
  if (u <= 0.0) return std::exp(log_values_[0] + slope_lo_ * (lx - lx0_));
  if (u >= static_cast<double>(n - 1)) {
    return std::exp(log_values_[n - 1] + slope_hi_ * (lx - lx0_ - step_ * (n - 1)));
  }
  const auto i = static_cast<std::size_t>(u);
  const double s = u - static_cast<double>(i);
  const double a = 1.0 - s;
  const double h2 = step_ * step_ / 6.0;
  const double v = a * log_values_[i] + s * log_values_[i + 1] +
                   ((a * a * a - a) * coef_[i] + (s * s * s - s) * coef_[i + 1]) * h2;
  return std::exp(v);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace numerics
}  // namespace levykb
