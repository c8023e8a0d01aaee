#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "levykb/error.hpp"
#include "levykb/numerics.hpp"
#include "measure_impl.hpp"

namespace levykb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
constexpr double kTaylorArg = 0.1;  // Taylor expansions used for |xi u| <= this
}  // namespace

// ---------------------------------------------------------------- power law

PowerLawMeasure::PowerLawMeasure(const PowerLawParams& p)
    : alpha_(p.alpha), c_(p.c_alpha), k_total_(numerics::cos_kernel_total(p.alpha)) {}

double PowerLawMeasure::second_moment_below(double eps, bool) const {
  return 2.0 * c_ * std::pow(eps, 2.0 - alpha_) / (2.0 - alpha_);
}

double PowerLawMeasure::tail_mass(double r, bool) const {
  if (r == kInf) return 0.0;
  return 2.0 * c_ * std::pow(r, -alpha_) / alpha_;
}

double PowerLawMeasure::re_psi(double xi) const {
  if (xi == 0.0) return 0.0;
  return 2.0 * c_ * k_total_ * std::pow(std::abs(xi), alpha_);
}

std::complex<double> PowerLawMeasure::psi_small(double xi, double r) const {
  if (xi == 0.0) return 0.0;
  const double ax = std::abs(xi);
  return 2.0 * c_ * std::pow(ax, alpha_) * numerics::cos_kernel_partial(alpha_, ax * r);
}

std::complex<double> PowerLawMeasure::lambda_hat(double xi, double r) const {
  if (xi == 0.0) return tail_mass(r, false);
  const double ax = std::abs(xi);
  return 2.0 * c_ * std::pow(ax, alpha_) * numerics::cos_tail_integral(alpha_, ax * r);
}

double PowerLawMeasure::sample_band(double lo, double hi, double u1, double u2) const {
  const double a = std::pow(lo, -alpha_);
  const double b = hi == kInf ? 0.0 : std::pow(hi, -alpha_);
  const double mag = std::pow(a - u1 * (a - b), -1.0 / alpha_);
  return u2 < 0.5 ? -mag : mag;
}

double PowerLawMeasure::density(double u) const {
  if (u == 0.0) return kInf;
  return c_ * std::pow(std::abs(u), -1.0 - alpha_);
}

// ------------------------------------------------------------ dyadic atoms

DyadicMeasure::DyadicMeasure(const DyadicAtomsParams& p)
    : gamma_(p.gamma), upsilon_(p.upsilon), n_min_(p.n_min) {}

double DyadicMeasure::position(int n) const { return std::exp2(-n * upsilon_); }
double DyadicMeasure::weight(int n) const { return std::exp2(n * gamma_); }

int DyadicMeasure::first_index_below(double x, bool strict) const {
  if (x == kInf) return n_min_;
  if (x <= 0.0) return std::numeric_limits<int>::max();
  const auto pred = [&](int n) {
    const double u = position(n);
    return strict ? u < x * (1.0 - 1e-12) : u <= x * (1.0 + 1e-12);
  };
  const double est = -std::log2(x) / upsilon_;
  int n = std::max(n_min_, static_cast<int>(std::floor(est)) - 2);
  while (!pred(n)) ++n;
  return n;
}

double DyadicMeasure::second_moment_below(double eps, bool strict) const {
  const int n1 = first_index_below(eps, strict);
  const double q = gamma_ - 2.0 * upsilon_;
  return 2.0 * std::exp2(n1 * q) / (1.0 - std::exp2(q));
}

double DyadicMeasure::tail_mass(double r, bool inclusive) const {
  const int n1 = first_index_below(r, inclusive);
  if (n1 <= n_min_) return 0.0;
  return 2.0 * (std::exp2(n1 * gamma_) - std::exp2(n_min_ * gamma_)) / (std::exp2(gamma_) - 1.0);
}

double DyadicMeasure::one_minus_cos_from(double xi, int n0) const {
  const double ax = std::abs(xi);
  if (ax == 0.0) return 0.0;
  double sum = 0.0;
  int n = n0;
  for (; ax * position(n) > 1e-2; ++n) {
    sum += 2.0 * weight(n) * (1.0 - std::cos(ax * position(n)));
  }
  // Remaining atoms: 1 - cos x = x^2/2 - x^4/24 + ..., summed as geometric series.
  double fact = 2.0;
  double tail = 0.0;
  for (int j = 1; j <= 5; ++j) {
    const double q = gamma_ - 2.0 * j * upsilon_;
    const double geo = std::exp2(n * q) / (1.0 - std::exp2(q));
    const double term = std::pow(ax, 2.0 * j) * geo / fact;
    tail += (j % 2 == 1) ? term : -term;
    fact *= (2.0 * j + 1) * (2.0 * j + 2);
  }
  return sum + 2.0 * tail;
}

double DyadicMeasure::re_psi(double xi) const { return one_minus_cos_from(xi, n_min_); }

std::complex<double> DyadicMeasure::psi_small(double xi, double r) const {
  return one_minus_cos_from(xi, first_index_below(r, false));
}

std::complex<double> DyadicMeasure::lambda_hat(double xi, double r) const {
  const int n1 = first_index_below(r, false);
  double sum = 0.0;
  for (int n = n_min_; n < n1; ++n) sum += 2.0 * weight(n) * std::cos(xi * position(n));
  return sum;
}

std::vector<Atom> DyadicMeasure::atoms_in(double lo, double hi) const {
  if (lo <= 0.0) throw Error(ErrorCode::InvalidParameters, "atoms_in needs lo > 0");
  const int n_first = first_index_below(hi, false);
  const int n_last = first_index_below(lo, false);  // first index with u <= lo (excluded)
  std::vector<Atom> out;
  for (int n = n_first; n < n_last; ++n) {
    out.push_back({position(n), weight(n)});
    out.push_back({-position(n), weight(n)});
  }
  return out;
}

double DyadicMeasure::sample_band(double lo, double hi, double u1, double u2) const {
  const int na = first_index_below(hi, false);
  const int nb = first_index_below(lo, false) - 1;
  if (nb < na) throw Error(ErrorCode::InvalidParameters, "empty atom band");
  // k = nb - n is geometric with ratio 2^{-gamma}, truncated at nb - na.
  const double rho = std::exp2(-gamma_);
  const int kmax = nb - na;
  const double total = 1.0 - std::pow(rho, kmax + 1);
  int k = static_cast<int>(std::floor(std::log1p(-u1 * total) / std::log(rho)));
  k = std::clamp(k, 0, kmax);
  const double mag = position(nb - k);
  return u2 < 0.5 ? -mag : mag;
}

// -------------------------------------------------------- tabulated density

TabulatedMeasure::TabulatedMeasure(const TabulatedDensityParams& p)
    : u_(p.u), m_(p.m), symmetric_(p.symmetric_extension) {
  const std::size_t n = u_.size();
  if (n < 4 || m_.size() != n) {
    throw Error(ErrorCode::InvalidParameters, "tabulated density needs >= 4 matching (u, m) pairs");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(u_[i] > 0.0) || !(m_[i] > 0.0) || (i > 0 && !(u_[i] > u_[i - 1]))) {
      throw Error(ErrorCode::InvalidParameters,
                  "tabulated density needs increasing u > 0 and positive weights");
    }
  }
  s_.resize(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    s_[i] = std::log(m_[i] / m_[i - 1]) / std::log(u_[i] / u_[i - 1]);
  }
  // Least-squares log-log slope over a decade of knots at either end.
  const auto fit = [&](bool low) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = low ? k : n - 1 - k;
      if (low ? u_[i] > 10.0 * u_.front() : u_[i] < 0.1 * u_.back()) break;
      const double x = std::log(u_[i]), y = std::log(m_[i]);
      sx += x; sy += y; sxx += x * x; sxy += x * y; ++cnt;
    }
    if (cnt < 2) return low ? s_[1] : s_[n - 1];
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  };
  s_lo_ = p.origin_exponent ? -1.0 - *p.origin_exponent : fit(true);
  s_hi_ = p.tail_exponent ? -1.0 - *p.tail_exponent : fit(false);
  if (!(s_lo_ > -3.0)) {
    throw Error(ErrorCode::InvalidParameters,
                "origin behaviour makes int u^2 m(u) du diverge (slope " + std::to_string(s_lo_) + ")");
  }
  if (!(s_hi_ < -1.0)) {
    throw Error(ErrorCode::InvalidParameters,
                "tail behaviour makes the tail mass diverge (slope " + std::to_string(s_hi_) + ")");
  }
}

int TabulatedMeasure::segment_of(double u) const {
  // 0: (0, u_0]; i in [1, n-1]: [u_{i-1}, u_i]; n: [u_{n-1}, inf)
  if (u <= u_.front()) return 0;
  if (u >= u_.back()) return static_cast<int>(u_.size());
  return static_cast<int>(std::upper_bound(u_.begin(), u_.end(), u) - u_.begin());
}

double TabulatedMeasure::half_density(double u) const {
  if (u <= 0.0) return 0.0;
  const int seg = segment_of(u);
  const int n = static_cast<int>(u_.size());
  if (seg == 0) return m_[0] * std::pow(u / u_[0], s_lo_);
  if (seg == n) return m_[n - 1] * std::pow(u / u_[n - 1], s_hi_);
  return m_[seg - 1] * std::pow(u / u_[seg - 1], s_[seg]);
}

double TabulatedMeasure::density(double u) const {
  if (u < 0.0) return symmetric_ ? half_density(-u) : 0.0;
  return half_density(u);
}

double TabulatedMeasure::segment_moment(int seg, int j, double a, double b) const {
  const int n = static_cast<int>(u_.size());
  double anchor_u, anchor_m, s, lo, hi;
  if (seg == 0) {
    anchor_u = u_[0]; anchor_m = m_[0]; s = s_lo_; lo = 0.0; hi = u_[0];
  } else if (seg == n) {
    anchor_u = u_[n - 1]; anchor_m = m_[n - 1]; s = s_hi_; lo = u_[n - 1]; hi = kInf;
  } else {
    anchor_u = u_[seg - 1]; anchor_m = m_[seg - 1]; s = s_[seg]; lo = u_[seg - 1]; hi = u_[seg];
  }
  a = std::max(a, lo);
  b = std::min(b, hi);
  if (!(b > a)) return 0.0;
  const double e = j + s + 1.0;
  // anchor_m (v/anchor_u)^s v^j integrated over [a, b]
  const auto prim = [&](double v) {
    if (v == 0.0) return e > 0.0 ? 0.0 : -kInf;
    if (v == kInf) return e < 0.0 ? 0.0 : kInf;
    return anchor_m * std::pow(v / anchor_u, s) * std::pow(v, j + 1.0) / e;
  };
  if (std::abs(e) < 1e-12) {
    if (a == 0.0 || b == kInf) return kInf;
    return anchor_m * std::pow(anchor_u, -s) * std::log(b / a);
  }
  return prim(b) - prim(a);
}

double TabulatedMeasure::moment(int j, double a, double b) const {
  if (!(b > a)) return 0.0;
  const int sa = segment_of(a == 0.0 ? 0.0 : a);
  const int sb = b == kInf ? static_cast<int>(u_.size()) : segment_of(b);
  double sum = 0.0;
  for (int seg = sa; seg <= sb; ++seg) sum += segment_moment(seg, j, a, b);
  return sum;
}

double TabulatedMeasure::second_moment_below(double eps, bool) const {
  return factor() * moment(2, 0.0, eps);
}

double TabulatedMeasure::tail_mass(double r, bool) const {
  return factor() * moment(0, r, kInf);
}

double TabulatedMeasure::first_moment_band(double lo, double hi) const {
  if (symmetric_) return 0.0;
  return moment(1, lo, hi);
}

double TabulatedMeasure::taylor_one_minus_cos(double xi, double c) const {
  double sum = 0.0, fact = 2.0;
  for (int j = 1; j <= 6; ++j) {
    const double term = std::pow(xi, 2.0 * j) / fact * moment(2 * j, 0.0, c);
    sum += (j % 2 == 1) ? term : -term;
    fact *= (2.0 * j + 1) * (2.0 * j + 2);
  }
  return sum;
}

double TabulatedMeasure::taylor_x_minus_sin(double xi, double c) const {
  double sum = 0.0, fact = 6.0;
  for (int j = 1; j <= 5; ++j) {
    const double term = std::pow(xi, 2.0 * j + 1) / fact * moment(2 * j + 1, 0.0, c);
    sum += (j % 2 == 1) ? term : -term;
    fact *= (2.0 * j + 2) * (2.0 * j + 3);
  }
  return sum;
}

double TabulatedMeasure::taylor_sin(double xi, double a, double c) const {
  double sum = 0.0, fact = 1.0;
  for (int j = 0; j <= 5; ++j) {
    const double term = std::pow(xi, 2.0 * j + 1) / fact * moment(2 * j + 1, a, c);
    sum += (j % 2 == 0) ? term : -term;
    fact *= (2.0 * j + 2) * (2.0 * j + 3);
  }
  return sum;
}

double TabulatedMeasure::trig_pieces(double xi, double a, double b, Trig kind) const {
  if (!(b > a)) return 0.0;
  const double quarter = kPi / (2.0 * xi);
  const auto f = [&](double u) {
    const double x = xi * u;
    double w = 0.0;
    switch (kind) {
      case Trig::OneMinusCos: w = 2.0 * std::sin(0.5 * x) * std::sin(0.5 * x); break;
      case Trig::Cos: w = std::cos(x); break;
      case Trig::Sin: w = std::sin(x); break;
      case Trig::XMinusSin: w = x - std::sin(x); break;
    }
    return w * half_density(u);
  };
  double sum = 0.0;
  double lo = a;
  while (lo < b) {
    const int seg = segment_of(lo * (1.0 + 1e-15));
    double seg_end = seg < static_cast<int>(u_.size()) ? u_[seg] : kInf;
    if (seg_end <= lo) seg_end = seg + 1 < static_cast<int>(u_.size()) ? u_[seg + 1] : kInf;
    double next_quarter = (std::floor(lo / quarter * (1.0 + 1e-13)) + 1.0) * quarter;
    if (next_quarter <= lo) next_quarter += quarter;
    const double hi = std::min({b, seg_end, next_quarter});
    sum += numerics::gk15(f, lo, hi).value;
    lo = hi;
  }
  return sum;
}

double TabulatedMeasure::trig_tail(double xi, double a, Trig kind) const {
  // Integrate up to the next zero of the oscillating factor, then sum
  // half-period contributions with epsilon acceleration.
  const double half = kPi / xi;
  const double offset = kind == Trig::Cos ? 0.5 * half : 0.0;
  const double k0 = std::floor((a - offset) / half + 1e-12) + 1.0;
  double z = offset + k0 * half;
  double total = trig_pieces(xi, a, z, kind);
  numerics::WynnEpsilon wynn;
  double scale = std::abs(total);
  double partial = total;
  wynn.push(partial);
  for (int k = 0; k < 2000; ++k) {
    const double term = trig_pieces(xi, z, z + half, kind);
    z += half;
    partial += term;
    scale = std::max(scale, std::abs(term));
    wynn.push(partial);
    if (k >= 6 && (wynn.error() <= 1e-13 * scale || std::abs(term) <= 1e-17 * scale)) {
      return wynn.estimate();
    }
    if (k >= 6 && scale == 0.0) return 0.0;
  }
  throw Error(ErrorCode::QuadratureFailure,
              "oscillatory tail did not converge at xi=" + std::to_string(xi));
}

double TabulatedMeasure::re_psi(double xi) const {
  const double ax = std::abs(xi);
  if (ax == 0.0) return 0.0;
  const double c = kTaylorArg / ax;
  const double u1 = 4.5 * kPi / ax;
  const double body = taylor_one_minus_cos(ax, c) + trig_pieces(ax, c, u1, Trig::OneMinusCos);
  const double tail = moment(0, u1, kInf) - trig_tail(ax, u1, Trig::Cos);
  return factor() * (body + tail);
}

double TabulatedMeasure::im_psi(double xi) const {
  if (symmetric_ || xi == 0.0) return 0.0;
  if (xi < 0.0) return -im_psi(-xi);
  const double c = kTaylorArg / xi;
  const double u1 = 4.0 * kPi / xi;
  double value = 0.0;
  if (c <= 1.0) {
    value = taylor_x_minus_sin(xi, c) + xi * moment(1, c, 1.0);
  } else {
    value = taylor_x_minus_sin(xi, 1.0) - taylor_sin(xi, 1.0, c);
  }
  value -= trig_pieces(xi, c, u1, Trig::Sin) + trig_tail(xi, u1, Trig::Sin);
  return value;
}

std::complex<double> TabulatedMeasure::psi_small(double xi, double r) const {
  const double ax = std::abs(xi);
  if (ax == 0.0) return 0.0;
  const double c = std::min(kTaylorArg / ax, r);
  double re = taylor_one_minus_cos(ax, c);
  if (r > c) re += trig_pieces(ax, c, r, Trig::OneMinusCos);
  re *= factor();
  double im = 0.0;
  if (!symmetric_) {
    im = taylor_x_minus_sin(ax, c);
    if (r > c) im += trig_pieces(ax, c, r, Trig::XMinusSin);
    if (xi < 0.0) im = -im;
  }
  return {re, im};
}

std::complex<double> TabulatedMeasure::lambda_hat(double xi, double r) const {
  const double ax = std::abs(xi);
  if (ax == 0.0) return tail_mass(r, false);
  const double re = factor() * trig_tail(ax, r, Trig::Cos);
  double im = 0.0;
  if (!symmetric_) {
    im = trig_tail(ax, r, Trig::Sin);
    if (xi < 0.0) im = -im;
  }
  return {re, im};
}

double TabulatedMeasure::sample_band(double lo, double hi, double u1, double u2) const {
  const double total = moment(0, lo, hi);
  double target = u1 * total;
  // Walk segments; inside a segment invert the power primitive.
  double a = lo;
  for (int guard = 0; guard < 100000; ++guard) {
    const int seg = segment_of(a * (1.0 + 1e-15));
    double seg_end = seg < static_cast<int>(u_.size()) ? u_[seg] : kInf;
    if (seg_end <= a) seg_end = seg + 1 < static_cast<int>(u_.size()) ? u_[seg + 1] : kInf;
    const double b = std::min(hi, seg_end);
    const double piece = moment(0, a, b);
    if (target <= piece || b >= hi) {
      const double s = seg == 0 ? s_lo_ : (seg == static_cast<int>(u_.size()) ? s_hi_ : s_[seg]);
      const double md = half_density(a);
      const double e = s + 1.0;
      double u;
      if (std::abs(e) < 1e-12) {
        u = a * std::exp(target / (md * a));
      } else {
        u = a * std::pow(1.0 + target * e / (md * a), 1.0 / e);
      }
      u = std::clamp(u, a, b);
      return (symmetric_ && u2 < 0.5) ? -u : u;
    }
    target -= piece;
    a = b;
  }
  throw Error(ErrorCode::Internal, "tabulated sampler did not terminate");
}

}  // namespace levykb
