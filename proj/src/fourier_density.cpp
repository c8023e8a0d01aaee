#include "levykb/fourier_density.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "levykb/decomposition.hpp"
#include "levykb/error.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

namespace levykb {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMaxFft = std::size_t{1} << 25;
constexpr char kCacheMagic[8] = {'L', 'K', 'B', 'P', 'S', 'I', '0', '1'};

bool tabulated(const LevyMeasure& mu) {
  return mu.kind() == MeasureKind::TabulatedDensity || mu.kind() == MeasureKind::OscillatingStable;
}

// psi(xi) without drift, or psi_small(xi, r). Tabulated measures go through a
// log-log spline of the real part built over the requested range.
class PsiSampler {
 public:
  PsiSampler(const LevyMeasure& mu, std::optional<double> radius) : mu_(mu), r_(radius) {}

  double re_direct(double xi) const {
    return r_ ? mu_.psi_small(xi, *r_).real() : mu_.re_psi(xi);
  }
  double im_direct(double xi) const {
    if (mu_.symmetric()) return 0.0;
    return r_ ? mu_.psi_small(xi, *r_).imag() : mu_.im_psi(xi) - mu_.drift() * xi;
  }

  void prepare(double lo, double hi) {
    if (!tabulated(mu_)) return;
    if (!spline_.empty() && spline_.x_lo() <= lo && spline_.x_hi() >= hi) return;
    spline_ = numerics::LogLogSpline([this](double x) { return re_direct(x); }, lo / 10.0, hi * 10.0,
                                     40.0);
  }

  cplx operator()(double xi) const {
    if (xi == 0.0) return 0.0;
    const double ax = std::abs(xi);
    const double re = spline_.empty() ? re_direct(ax) : spline_(ax);
    const double im = im_direct(ax);
    return {re, xi < 0.0 ? -im : im};
  }

  // psi(n h), n = 0..m-1, optionally through the on-disk cache.
  std::vector<cplx> samples(double h, std::size_t m, bool use_cache) {
    const char* dir = use_cache ? std::getenv("LEVYKB_CACHE") : nullptr;
    std::string path;
    std::uint64_t spec_hash = 0, grid_hash = 0;
    if (dir && *dir) {
      spec_hash = numerics::fnv1a(mu_.hash());
      std::ostringstream key;
      key << std::setprecision(17) << (r_ ? *r_ : -1.0) << ':' << h << ':' << m;
      grid_hash = numerics::fnv1a(key.str());
      std::ostringstream name;
      name << "psi_" << std::hex << spec_hash << '_' << grid_hash << ".bin";
      path = (std::filesystem::path(dir) / name.str()).string();
      if (auto cached = read_cache(path, spec_hash, grid_hash, m)) return *cached;
    }
    if (m > 1) prepare(h, h * static_cast<double>(m - 1));
    std::vector<cplx> out(m);
    for (std::size_t n = 0; n < m; ++n) out[n] = (*this)(h * static_cast<double>(n));
    if (!path.empty()) write_cache(path, spec_hash, grid_hash, out);
    return out;
  }

 private:
  static std::optional<std::vector<cplx>> read_cache(const std::string& path, std::uint64_t spec_hash,
                                                     std::uint64_t grid_hash, std::size_t m) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    std::uint64_t hdr[3];
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    if (!in || std::memcmp(magic, kCacheMagic, 8) != 0 || hdr[0] != spec_hash || hdr[1] != grid_hash ||
        hdr[2] != m) {
      return std::nullopt;
    }
    std::vector<cplx> out(m);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(m * sizeof(cplx)));
    if (!in) return std::nullopt;
    return out;
  }

  static void write_cache(const std::string& path, std::uint64_t spec_hash, std::uint64_t grid_hash,
                          const std::vector<cplx>& v) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path(), ec);
    const std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    const std::uint64_t hdr[3] = {spec_hash, grid_hash, v.size()};
    out.write(kCacheMagic, 8);
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(cplx)));
    out.close();
    if (out) std::filesystem::rename(tmp, path, ec);
  }

  const LevyMeasure& mu_;
  std::optional<double> r_;
  numerics::LogLogSpline spline_;
};

// Characteristic function samples phi(n h), n = 0..m-1.
using HalfSpectrum = std::function<std::vector<cplx>(double h, std::size_t m)>;

struct Plan {
  double period = 0.0;       // minimal L
  double tail_factor = 1.0;  // multiplies the growth-floor tail integral
  double alias_bound = 0.0;
  double dropped_mass = 0.0;
  double rho = 0.0;
  GrowthConstants gc;
};

// (1/pi) int_Xi^inf xi^k exp(-t c xi^q) dxi, q = 2/beta.
double tail_integral(const Plan& plan, double t, int k, double xi_cut) {
  const double q = 2.0 / plan.gc.beta_hat;
  const double tc = t * plan.gc.c_floor;
  const double a = (k + 1.0) / q;
  return plan.tail_factor / kPi / q * std::pow(tc, -a) * numerics::upper_gamma(a, tc * std::pow(xi_cut, q));
}

double choose_cutoff(const Plan& plan, double t, int k, double target) {
  double hi = 1.0;
  while (tail_integral(plan, t, k, hi) > target) {
    hi *= 2.0;
    if (hi > 1e15) {
      throw Error(ErrorCode::TruncationUnreachable,
                  "frequency cutoff above 1e15 needed; growth constants too weak");
    }
  }
  double lo = hi / 2.0;
  if (hi == 1.0) return 1.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = std::sqrt(lo * hi);
    (tail_integral(plan, t, k, mid) > target ? lo : hi) = mid;
  }
  return hi;
}

cplx deriv_factor(double xi, int k) {
  cplx f = 1.0;
  for (int j = 0; j < k; ++j) f *= cplx(0.0, -xi);
  return f;
}

bool is_uniform(const std::vector<double>& x) {
  if (x.size() < 8) return false;
  const double d0 = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  if (!(d0 > 0.0)) return false;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (std::abs(x[i] - x[i - 1] - d0) > 1e-9 * d0) return false;
  }
  return true;
}

// Periodic-grid inversion at x0 + i dx_req, i < npts.
std::vector<double> invert_fft(const HalfSpectrum& spectrum, double x0, double dx_req, std::size_t npts,
                               double xi_needed, double period, int k, std::size_t& n_out,
                               double& xi_eff, double& period_out) {
  const auto s = static_cast<std::size_t>(std::max(1.0, std::ceil(dx_req * xi_needed / kPi)));
  const double dx = dx_req / static_cast<double>(s);
  const double span = dx_req * static_cast<double>(npts - 1);
  const std::size_t n = numerics::next_pow2(static_cast<std::size_t>(
      std::max({std::ceil(period / dx), std::ceil(span / dx) + 2.0, 16.0})));
  if (n > kMaxFft) {
    throw Error(ErrorCode::TruncationUnreachable,
                "inversion grid needs " + std::to_string(n) + " points (cap 2^25)");
  }
  const double h = 2.0 * kPi / (static_cast<double>(n) * dx);
  const std::size_t m = n / 2 + 1;
  // Bins above the cutoff stay zero; their contribution is the tail bound.
  const std::size_t used = std::min(m - 1, static_cast<std::size_t>(std::ceil(xi_needed / h)) + 1);
  auto phi = spectrum(h, used);
  phi.resize(m, cplx(0.0));
  fftw_complex* in = fftw_alloc_complex(m);
  std::vector<double> out(n);
  fftw_plan p = fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out.data(), FFTW_ESTIMATE);
  for (std::size_t j = 0; j < m; ++j) {
    const double xi = h * static_cast<double>(j);
    cplx c = phi[j] * deriv_factor(xi, k) * std::polar(1.0, -x0 * xi);
    if (j == m - 1) c = 0.0;  // Nyquist bin
    c = std::conj(c);
    in[j][0] = c.real();
    in[j][1] = c.imag();
  }
  fftw_execute(p);
  fftw_destroy_plan(p);
  fftw_free(in);
  std::vector<double> values(npts);
  for (std::size_t i = 0; i < npts; ++i) values[i] = out[i * s] * h / (2.0 * kPi);
  n_out = n;
  xi_eff = h * static_cast<double>(used - 1);
  period_out = static_cast<double>(n) * dx;
  return values;
}

// Chirp-z evaluation of the same trapezoid sum at x0 + j dx only, with the
// period rounded up to a whole number K of steps. Cheaper than the full grid
// when the period is long compared with the output range.
std::size_t chirp_size(double xi_needed, double period, double dx, std::size_t npts) {
  const double h = 2.0 * kPi / (std::ceil(period / dx) * dx);
  return numerics::next_pow2(static_cast<std::size_t>(std::ceil(xi_needed / h)) + 1 + npts);
}

std::vector<double> invert_chirp(const HalfSpectrum& spectrum, double x0, double dx, std::size_t npts,
                                 double xi_needed, double period, int k, double& xi_eff, double& period_out) {
  const auto K = static_cast<std::uint64_t>(std::ceil(period / dx));
  const double len = static_cast<double>(K) * dx;
  const double h = 2.0 * kPi / len;
  const auto m = static_cast<std::size_t>(std::ceil(xi_needed / h)) + 1;
  const std::size_t p = numerics::next_pow2(m + npts);
  if (p > kMaxFft) throw Error(ErrorCode::TruncationUnreachable, "chirp transform above 2^25 points");
  const auto phi = spectrum(h, m);
  // w_n = exp(-i pi n^2 / K), with n^2 reduced exactly modulo 2K.
  const auto chirp = [K](std::uint64_t n) {
    const std::uint64_t r = (n % (2 * K)) * (n % (2 * K)) % (2 * K);
    return std::polar(1.0, -kPi * static_cast<double>(r) / static_cast<double>(K));
  };
  fftw_complex* u = fftw_alloc_complex(p);
  fftw_complex* v = fftw_alloc_complex(p);
  std::memset(u, 0, sizeof(fftw_complex) * p);
  std::memset(v, 0, sizeof(fftw_complex) * p);
  for (std::size_t n = 0; n < m; ++n) {
    const double xi = h * static_cast<double>(n);
    cplx a = phi[n] * deriv_factor(xi, k) * std::polar(1.0, -x0 * xi) * chirp(n);
    if (n == 0) a *= 0.5;
    u[n][0] = a.real();
    u[n][1] = a.imag();
  }
  for (std::size_t j = 0; j < npts; ++j) {
    const cplx c = std::conj(chirp(j));
    v[j][0] = c.real();
    v[j][1] = c.imag();
  }
  for (std::size_t n = 1; n < m; ++n) {
    const cplx c = std::conj(chirp(n));
    v[p - n][0] = c.real();
    v[p - n][1] = c.imag();
  }
  fftw_plan fu = fftw_plan_dft_1d(static_cast<int>(p), u, u, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan fv = fftw_plan_dft_1d(static_cast<int>(p), v, v, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(fu);
  fftw_execute(fv);
  for (std::size_t i = 0; i < p; ++i) {
    const cplx z = cplx(u[i][0], u[i][1]) * cplx(v[i][0], v[i][1]);
    u[i][0] = z.real();
    u[i][1] = z.imag();
  }
  fftw_plan bu = fftw_plan_dft_1d(static_cast<int>(p), u, u, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(bu);
  std::vector<double> values(npts);
  for (std::size_t j = 0; j < npts; ++j) {
    const cplx s = chirp(j) * cplx(u[j][0], u[j][1]) / static_cast<double>(p);
    values[j] = s.real() * h / kPi;
  }
  fftw_destroy_plan(fu);
  fftw_destroy_plan(fv);
  fftw_destroy_plan(bu);
  fftw_free(u);
  fftw_free(v);
  xi_eff = h * static_cast<double>(m - 1);
  period_out = len;
  return values;
}

// Direct trapezoid sums over n h, |n h| <= Xi, for arbitrary points.
std::vector<double> invert_direct(const HalfSpectrum& spectrum, const std::vector<double>& x,
                                  double xi_needed, double period, int k, double& xi_eff) {
  const double h = 2.0 * kPi / period;
  const auto m = static_cast<std::size_t>(std::ceil(xi_needed / h)) + 1;
  const auto phi = spectrum(h, m);
  std::vector<cplx> weighted(m);
  for (std::size_t j = 0; j < m; ++j) weighted[j] = phi[j] * deriv_factor(h * static_cast<double>(j), k);
  std::vector<double> values(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sum = k == 0 ? 0.5 * weighted[0].real() : 0.0;
    const cplx step = std::polar(1.0, -x[i] * h);
    cplx ph = step;
    for (std::size_t j = 1; j < m; ++j) {
      if (j % 512 == 0) ph = std::polar(1.0, -x[i] * h * static_cast<double>(j));
      sum += (weighted[j] * ph).real();
      ph *= step;
    }
    values[i] = sum * h / kPi;
  }
  xi_eff = h * static_cast<double>(m - 1);
  return values;
}

DensityGrid run_inversion(DensityKind which, double t, const std::vector<double>& x, int k,
                          const Plan& plan, const HalfSpectrum& spectrum, const DensityOptions& opts) {
  if (x.empty()) throw Error(ErrorCode::InvalidParameters, "empty x grid");
  if (!std::is_sorted(x.begin(), x.end())) throw Error(ErrorCode::InvalidParameters, "x grid must be sorted");
  DensityGrid g;
  g.which = which;
  g.t = t;
  g.k = k;
  g.x = x;
  g.rho_t = plan.rho;
  g.period = plan.period;
  g.alias_bound = plan.alias_bound;
  g.dropped_mass = plan.dropped_mass;

  double scale_guess = 1e-3 * std::pow(plan.rho, k + 1);
  for (int pass = 0; pass < 3; ++pass) {
    const double xi_needed = choose_cutoff(plan, t, k, opts.rel_trunc * scale_guess);
    double xi_eff = xi_needed;
    const double dx_req = is_uniform(x) ? (x.back() - x.front()) / static_cast<double>(x.size() - 1) : 0.0;
    const std::size_t full_size =
        dx_req > 0.0 ? numerics::next_pow2(static_cast<std::size_t>(std::max(
                           plan.period / (dx_req / std::max(1.0, std::ceil(dx_req * xi_needed / kPi))), 16.0)))
                     : 0;
    if (dx_req > 0.0 && 6 * chirp_size(xi_needed, plan.period, dx_req, x.size()) < full_size) {
      g.values = invert_chirp(spectrum, x.front(), dx_req, x.size(), xi_needed, plan.period, k, xi_eff, g.period);
      g.fft_size = chirp_size(xi_needed, plan.period, dx_req, x.size());
    } else if (dx_req > 0.0) {
      g.values = invert_fft(spectrum, x.front(), dx_req, x.size(), xi_needed, plan.period, k, g.fft_size,
                            xi_eff, g.period);
    } else {
      g.values = invert_direct(spectrum, x, xi_needed, plan.period, k, xi_eff);
      g.fft_size = 0;
      g.period = plan.period;
    }
    g.trunc_freq = xi_eff;
    g.tail_bound = tail_integral(plan, t, k, xi_eff);
    double vmax = 0.0;
    for (double v : g.values) vmax = std::max(vmax, std::abs(v));
    if (g.tail_bound <= opts.rel_trunc * vmax || vmax == 0.0) break;
    scale_guess = vmax;
  }
  return g;
}

struct Setup {
  LevyMeasure mu;
  double t;
  double rho;
  GrowthConstants gc;
  double x_ext;
};

Setup setup(const LevyMeasure& mu, double t, const std::vector<double>& x, const DensityOptions& opts) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidParameters, "t must be > 0");
  if (x.empty()) throw Error(ErrorCode::InvalidParameters, "empty x grid");
  Setup s{mu, t, opts.rho_t ? *opts.rho_t : rho(mu, t), opts.growth ? *opts.growth : growth_constants(mu), 0.0};
  s.x_ext = std::max(std::abs(x.front()), std::abs(x.back()));
  s.x_ext = std::max(s.x_ext, 1.0 / s.rho);
  return s;
}

// One-sided density tail bound used for the periodic images of heavy tails:
// sum_{j>=1} m(jL - x) <= m(L - x) + mu_side(|u| > L - x) / L.
double alias_estimate(const LevyMeasure& mu, double t, double period, double x_ext, int k) {
  const double d = period - x_ext;
  const double side = mu.symmetric() ? 0.5 * mu.tail_mass(d) : mu.tail_mass(d);
  const double m = std::max(mu.density(d), mu.density(-d));
  const double deriv = std::pow((k + 2.0) / d, k);
  return 2.0 * 2.0 * t * (m + side / period) * deriv;
}

// Full-density plan for density measures: period from the alias criterion.
Plan density_measure_plan(const Setup& s, int k, const DensityOptions& opts) {
  Plan plan;
  plan.rho = s.rho;
  plan.gc = s.gc;
  double period = std::max(8.0 * s.x_ext, 400.0 / s.rho);
  const double target = opts.alias_tol * std::pow(s.rho, k + 1);
  while (alias_estimate(s.mu, s.t, period, s.x_ext, k) > target) {
    period *= 1.5;
    if (period > 1e12 * s.x_ext) {
      throw Error(ErrorCode::TruncationUnreachable, "periodic images cannot be pushed below tolerance");
    }
  }
  plan.period = period;
  plan.alias_bound = alias_estimate(s.mu, s.t, period, s.x_ext, k);
  return plan;
}

// exp(-exponent(xi)) * extra(xi) sampled on n h.
HalfSpectrum make_spectrum(std::shared_ptr<PsiSampler> sampler, double t, double shift,
                           std::function<void(double, std::vector<cplx>&)> extra, bool use_cache) {
  return [=](double h, std::size_t m) {
    auto psi = sampler->samples(h, m, use_cache);
    std::vector<cplx> phi(m);
    for (std::size_t n = 0; n < m; ++n) {
      const double xi = h * static_cast<double>(n);
      phi[n] = std::exp(-t * psi[n] - cplx(0.0, xi * shift));
    }
    if (extra) {
      std::vector<cplx> f(m);
      extra(h, f);
      for (std::size_t n = 0; n < m; ++n) phi[n] *= f[n];
    }
    return phi;
  };
}

// sum_y w_y e^{i n h y}, n < out.size(), by phasor recurrence.
void atom_phasors(const std::vector<Atom>& atoms, double h, std::vector<cplx>& out) {
  std::fill(out.begin(), out.end(), cplx(0.0));
  for (const Atom& a : atoms) {
    const cplx step = std::polar(1.0, h * a.position);
    cplx ph = 1.0;
    for (std::size_t n = 0; n < out.size(); ++n) {
      if (n % 512 == 0) ph = std::polar(1.0, h * a.position * static_cast<double>(n));
      out[n] += a.weight * ph;
      ph *= step;
    }
  }
}

struct Prepared {
  Plan plan;
  HalfSpectrum spectrum;
};

Prepared prepare_full(const LevyMeasure& mu, double t, const std::vector<double>& x, int k,
                      const DensityOptions& opts) {
  if (k < 0) throw Error(ErrorCode::InvalidParameters, "derivative order must be >= 0");
  const Setup s = setup(mu, t, x, opts);
  if (!mu.atomic()) {
    auto sampler = std::make_shared<PsiSampler>(mu, std::nullopt);
    return {density_measure_plan(s, k, opts), make_spectrum(sampler, t, t * mu.drift(), nullptr, opts.use_cache)};
  }
  // Atomic: jumps beyond R enter as an explicit compound Poisson law. The
  // near part (jumps <= R) reaches beyond K R with probability below tol.
  const double split = std::max(0.5 * s.x_ext, 16.0 / s.rho);
  const double lam_near = t * (mu.tail_mass(1.0 / s.rho) - mu.tail_mass(split));
  int reach = 1;
  while (reach < 64 && numerics::poisson_series_tail(lam_near, reach - 1) * std::exp(-lam_near) > 1e-14) ++reach;
  reach += 2;
  const Decomposition far = build_decomposition(mu, t, 1.0 / split);
  const int m_max = poisson_m_max(far.lambda_total, 1e-14);
  PoissonOptions po;
  po.tol = 1e-14;
  po.window = s.x_ext + reach * split;
  const PoissonLaw law = poisson_law(far, m_max, po);
  Plan plan;
  plan.rho = s.rho;
  plan.gc = s.gc;
  plan.period = std::max({8.0 * s.x_ext, 400.0 / s.rho, 1.25 * (po.window + s.x_ext + reach * split)});
  plan.tail_factor = std::exp(2.0 * far.lambda_total);
  plan.dropped_mass = law.dropped_mass + law.tail_bound;
  // Mass of near-jump sums reaching the first periodic image.
  const int jumps = static_cast<int>((plan.period - po.window - s.x_ext) / split);
  plan.alias_bound = numerics::poisson_series_tail(lam_near, jumps - 1) * std::exp(-lam_near);
  auto sampler = std::make_shared<PsiSampler>(mu, split);
  const auto atoms = law.atoms;
  return {plan, make_spectrum(sampler, t, far.a_t,
                              [atoms](double h, std::vector<cplx>& f) { atom_phasors(atoms, h, f); },
                              opts.use_cache)};
}

Plan bar_plan(const Setup& s) {
  Plan plan;
  plan.rho = s.rho;
  plan.gc = s.gc;
  plan.period = std::max(8.0 * s.x_ext, 400.0 / s.rho);
  // Re psi_t >= t Re psi - 2 t psi^U(rho_t)
  plan.tail_factor = std::exp(2.0 * s.t * psi_U(s.mu, s.rho));
  return plan;
}

Prepared prepare_bar(const LevyMeasure& mu, double t, const std::vector<double>& x, int k,
                     const DensityOptions& opts) {
  if (k < 0) throw Error(ErrorCode::InvalidParameters, "derivative order must be >= 0");
  const Setup s = setup(mu, t, x, opts);
  auto sampler = std::make_shared<PsiSampler>(mu, 1.0 / s.rho);
  return {bar_plan(s), make_spectrum(sampler, t, 0.0, nullptr, opts.use_cache)};
}

}  // namespace

DensityGrid density(const LevyMeasure& mu, double t, const std::vector<double>& x, int k,
                    const DensityOptions& opts) {
  const Prepared p = prepare_full(mu, t, x, k, opts);
  return run_inversion(DensityKind::Full, t, x, k, p.plan, p.spectrum, opts);
}

DensityGrid density_bar(const LevyMeasure& mu, double t, const std::vector<double>& x, int k,
                        const DensityOptions& opts) {
  const Prepared p = prepare_bar(mu, t, x, k, opts);
  return run_inversion(DensityKind::Bar, t, x, k, p.plan, p.spectrum, opts);
}

DensityEvaluator::DensityEvaluator(const LevyMeasure& mu, const DensityGrid& g, const DensityOptions& opts)
    : k_(g.k) {
  if (g.x.empty() || !(g.period > 0.0)) throw Error(ErrorCode::InvalidParameters, "density grid not computed");
  DensityOptions o = opts;
  o.rho_t = g.rho_t;
  o.use_cache = false;
  const std::vector<double> range{g.x.front(), g.x.back()};
  const Prepared p = g.which == DensityKind::Full ? prepare_full(mu, g.t, range, g.k, o)
                                                  : prepare_bar(mu, g.t, range, g.k, o);
  h_ = 2.0 * kPi / g.period;
  const auto m = static_cast<std::size_t>(std::llround(g.trunc_freq / h_)) + 1;
  w_ = p.spectrum(h_, m);
  for (std::size_t j = 0; j < m; ++j) w_[j] *= deriv_factor(h_ * static_cast<double>(j), k_);
}

double DensityEvaluator::operator()(double x) const {
  double sum = k_ == 0 ? 0.5 * w_[0].real() : 0.0;
  const cplx step = std::polar(1.0, -x * h_);
  cplx ph = step;
  for (std::size_t j = 1; j < w_.size(); ++j) {
    if (j % 512 == 0) ph = std::polar(1.0, -x * h_ * static_cast<double>(j));
    sum += (w_[j] * ph).real();
    ph *= step;
  }
  return sum * h_ / kPi;
}

double locate_xt(const LevyMeasure& mu, const DensityGrid& bar, const DensityOptions& opts) {
  if (bar.which != DensityKind::Bar || bar.k != 0) {
    throw Error(ErrorCode::PreconditionFailed, "locate_xt needs a k = 0 bar-density grid");
  }
  const auto& x = bar.x;
  const double r = bar.rho_t;
  if (x.size() < 3 || x.front() > -10.0 / r * (1.0 - 1e-12) || x.back() < 10.0 / r * (1.0 - 1e-12)) {
    throw Error(ErrorCode::PreconditionFailed, "grid must cover [-10/rho_t, 10/rho_t]");
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] - x[i - 1] > 0.01 / r * (1.0 + 1e-9)) {
      throw Error(ErrorCode::PreconditionFailed, "grid step must be <= 0.01/rho_t");
    }
  }
  const auto it = std::max_element(bar.values.begin(), bar.values.end());
  const std::size_t i = static_cast<std::size_t>(it - bar.values.begin());
  if (i == 0 || i + 1 == x.size()) {
    throw Error(ErrorCode::MaxOnBoundary, "maximum of pbar_t on the grid boundary; enlarge the grid");
  }
  // Golden section on the two neighbouring cells with direct evaluation.
  const DensityEvaluator eval(mu, bar, opts);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = x[i - 1], b = x[i + 1];
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = eval(c), fd = eval(d);
  for (int it2 = 0; it2 < 60 && b - a > 1e-12 / r; ++it2) {
    if (fc >= fd) {
      b = d; d = c; fd = fc;
      c = b - g * (b - a); fc = eval(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + g * (b - a); fd = eval(d);
    }
  }
  return 0.5 * (a + b);
}

ConvolutionCheck convolution_check(const LevyMeasure& mu, double t, const std::vector<double>& x, int m_max,
                                   const DensityOptions& opts) {
  DensityOptions o = opts;
  if (!o.rho_t) o.rho_t = rho(mu, t);
  if (!o.growth) o.growth = growth_constants(mu);
  const DensityGrid lhs = density(mu, t, x, 0, o);
  const Setup s = setup(mu, t, x, o);
  const Decomposition dec = build_decomposition(mu, t, s.rho);
  ConvolutionCheck out;
  out.m_max = m_max >= 0 ? m_max : poisson_m_max(dec.lambda_total, 1e-14);
  auto sampler = std::make_shared<PsiSampler>(mu, dec.radius);
  Plan plan;
  HalfSpectrum spec;
  if (mu.atomic()) {
    PoissonOptions po;
    po.tol = 1.0;  // the tail is reported, not enforced, for user-chosen m_max
    po.window = s.x_ext + 60.0 / s.rho;
    const PoissonLaw law = poisson_law(dec, out.m_max, po);
    out.poisson_tail = law.tail_bound;
    out.dropped_mass = law.dropped_mass;
    plan = bar_plan(s);
    plan.period = std::max(plan.period, 4.0 * po.window);
    const auto atoms = law.atoms;
    spec = make_spectrum(sampler, t, dec.a_t,
                         [atoms](double h, std::vector<cplx>& f) { atom_phasors(atoms, h, f); }, false);
  } else {
    out.poisson_tail = std::exp(-dec.lambda_total) * numerics::poisson_series_tail(dec.lambda_total, out.m_max);
    plan = density_measure_plan(s, 0, o);
    plan.tail_factor = std::exp(2.0 * s.t * psi_U(mu, s.rho));
    const int mm = out.m_max;
    const Decomposition d = dec;
    // Tabulated kinds: the jump transform comes from the two exponent tables,
    // t Lhat = t psi_small + Lambda_t + i xi (a_t - t a) - t psi.
    std::shared_ptr<PsiSampler> full, small;
    if (tabulated(mu)) {
      full = std::make_shared<PsiSampler>(mu, std::nullopt);
      small = std::make_shared<PsiSampler>(mu, dec.radius);
    }
    spec = make_spectrum(sampler, t, dec.a_t,
                         [d, mm, full, small, t](double h, std::vector<cplx>& f) {
                           const double e = std::exp(-d.lambda_total);
                           const double shift = d.a_t - t * d.mu.drift();
                           std::vector<cplx> pf, ps;
                           if (full) {
                             pf = full->samples(h, f.size(), false);
                             ps = small->samples(h, f.size(), false);
                           }
                           for (std::size_t n = 0; n < f.size(); ++n) {
                             const double xi = h * static_cast<double>(n);
                             const cplx lh = full ? t * ps[n] + d.lambda_total + cplx(0.0, xi * shift) - t * pf[n]
                                                  : lambda_t_hat(d, xi);
                             cplx term = 1.0, sum = 1.0;
                             for (int m = 1; m <= mm; ++m) {
                               term *= lh / static_cast<double>(m);
                               sum += term;
                             }
                             f[n] = e * sum;
                           }
                         },
                         false);
  }
  const DensityGrid rhs = run_inversion(DensityKind::Full, t, x, 0, plan, spec, o);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.max_deviation = std::max(out.max_deviation, std::abs(lhs.values[i] - rhs.values[i]));
    out.max_density = std::max(out.max_density, lhs.values[i]);
  }
  out.relative = out.max_deviation / out.max_density;
  return out;
}

void write_density_csv(const DensityGrid& g, std::ostream& os, bool header) {
  if (header) os << "t,x,value,tail_bound\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    os << g.t << ',' << g.x[i] << ',' << g.values[i] << ',' << g.tail_bound << '\n';
  }
}

}  // namespace levykb
