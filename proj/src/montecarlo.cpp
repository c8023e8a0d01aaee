#include "levykb/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "levykb/error.hpp"
#include "levykb/scales.hpp"

namespace levykb {

// ------------------------------------------------------------------ Philox

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

}  // namespace

Philox::Philox(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

Philox::result_type Philox::operator()() {
  if (used_ == 4) {
    buf_ = block(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    used_ = 0;
  }
  return buf_[used_++];
}

double Philox::uniform() {
  const std::uint64_t a = (*this)() >> 5, b = (*this)() >> 6;
  return (static_cast<double>(a * 67108864u + b) + 0.5) / 9007199254740992.0;
}

std::string to_string(SamplerScheme s) { return s == SamplerScheme::GaussianApprox ? "GaussianApprox" : "DropSmall"; }

SamplerScheme scheme_from_string(const std::string& s) {
  if (s == "GaussianApprox" || s == "gaussian") return SamplerScheme::GaussianApprox;
  if (s == "DropSmall" || s == "drop") return SamplerScheme::DropSmall;
  throw Error(ErrorCode::InvalidParameters, "unknown sampler scheme '" + s + "'");
}

// ---------------------------------------------------------------- sampling

double small_jump_sigma(const LevyMeasure& mu, double t, double delta) {
  return std::sqrt(t * mu.second_moment_below(delta, false));
}

double default_delta(const LevyMeasure& mu, double t) {
  const double r = 1.0 / rho(mu, t);
  const double step = std::exp2(-0.25);
  double d = r;
  for (int i = 0; i < 400; ++i, d *= step) {
    if (small_jump_sigma(mu, t, d) >= 5.0 * d) return d;
  }
  throw Error(ErrorCode::DeltaTooCoarse, "no delta down to 2^-100/rho_t meets sigma(delta)/delta >= 5");
}

SampleRun sample_increments(const LevyMeasure& mu, double t, const SamplerConfig& cfg) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidParameters, "t must be positive");
  if (cfg.n_samples < 1) throw Error(ErrorCode::InvalidParameters, "n_samples must be >= 1");
  SampleRun run;
  run.t = t;
  run.config = cfg;
  run.spec_hash = mu.hash();
  const double radius = 1.0 / rho(mu, t);
  run.delta = cfg.delta ? *cfg.delta : default_delta(mu, t);
  if (!(run.delta > 0.0)) throw Error(ErrorCode::InvalidParameters, "delta must be positive");
  if (run.delta > radius * (1.0 + 1e-12)) {
    throw Error(ErrorCode::DeltaTooCoarse, "delta exceeds 1/rho_t = " + std::to_string(radius));
  }
  run.sigma_small = small_jump_sigma(mu, t, run.delta);
  if (cfg.scheme == SamplerScheme::GaussianApprox && run.sigma_small < 5.0 * run.delta) {
    throw Error(ErrorCode::DeltaTooCoarse, "sigma(delta)/delta = " + std::to_string(run.sigma_small / run.delta) +
                                               " < 5 at delta = " + std::to_string(run.delta));
  }
  run.config.delta = run.delta;
  run.jump_rate = t * mu.tail_mass(run.delta, false);
  // Z_t = -t a + jumps beyond delta - t int_{delta < |u| < 1} u mu(du) + small part.
  run.shift = -t * mu.drift() - t * mu.compensator_shift(run.delta);
  const double sigma = cfg.scheme == SamplerScheme::GaussianApprox ? run.sigma_small : 0.0;
  const double inf = std::numeric_limits<double>::infinity();

  run.samples.assign(cfg.n_samples, 0.0);
  const auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Philox g(cfg.seed, i);
      double x = run.shift;
      if (run.jump_rate > 0.0) {
        const long n = boost::random::poisson_distribution<long, double>(run.jump_rate)(g);
        for (long j = 0; j < n; ++j) x += mu.sample_band(run.delta, inf, g.uniform(), g.uniform());
      }
      if (sigma > 0.0) x += boost::random::normal_distribution<double>(0.0, sigma)(g);
      run.samples[i] = x;
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_samples / 1000 + 1));
  if (threads <= 1) {
    work(0, cfg.n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.n_samples + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::size_t lo = k * chunk, hi = std::min(cfg.n_samples, lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return run;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  const double f = pos - static_cast<double>(i);
  return (1.0 - f) * s[i] + f * s[i + 1];
}

// Trapezoid CDF of a grid with linear interpolation of the density inside cells.
struct GridCdf {
  const std::vector<double>& x;
  const std::vector<double>& p;
  std::vector<double> cum;
  double left = 0.0;

  GridCdf(const std::vector<double>& xs, const std::vector<double>& ps) : x(xs), p(ps), cum(xs.size(), 0.0) {
    for (std::size_t j = 1; j < x.size(); ++j) cum[j] = cum[j - 1] + 0.5 * (x[j] - x[j - 1]) * (p[j] + p[j - 1]);
  }
  double total() const { return cum.back(); }

  double operator()(double v) const {
    if (v <= x.front()) return left;
    if (v >= x.back()) return left + cum.back();
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), v) - x.begin()) - 1;
    const double h = x[j + 1] - x[j];
    const double s = v - x[j];
    const double pv = p[j] + (p[j + 1] - p[j]) * s / h;
    return left + cum[j] + 0.5 * s * (p[j] + pv);
  }
};

void check_grid(const DensityGrid& g) {
  if (g.which != DensityKind::Full || g.k != 0) {
    throw Error(ErrorCode::PreconditionFailed, "comparison needs a k = 0 full-density grid");
  }
  if (g.x.size() < 2 || g.values.size() != g.x.size()) {
    throw Error(ErrorCode::InvalidParameters, "density grid needs at least two points");
  }
  for (std::size_t i = 1; i < g.x.size(); ++i) {
    if (!(g.x[i] > g.x[i - 1])) throw Error(ErrorCode::InvalidParameters, "density grid must be increasing");
  }
}

}  // namespace

SampleStats sample_stats(const std::vector<double>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidParameters, "no samples");
  SampleStats st;
  double m = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : samples) {
    ++n;
    const double d = v - m;
    m += d / static_cast<double>(n);
    m2 += d * (v - m);
  }
  st.mean = m;
  st.stddev = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  st.median = quantile_sorted(s, 0.5);
  st.q_lo = quantile_sorted(s, 0.0005);
  st.q_hi = quantile_sorted(s, 0.9995);
  return st;
}

GofResult compare_to_density(const std::vector<double>& samples, const DensityGrid& grid) {
  check_grid(grid);
  if (samples.empty()) throw Error(ErrorCode::InvalidParameters, "no samples");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  const double qlo = quantile_sorted(s, 0.0005), qhi = quantile_sorted(s, 0.9995);
  if (qlo < grid.x.front() || qhi > grid.x.back()) {
    throw Error(ErrorCode::GridCoverageInsufficient,
                "grid [" + std::to_string(grid.x.front()) + ", " + std::to_string(grid.x.back()) +
                    "] does not cover the central 99.9% of the samples [" + std::to_string(qlo) + ", " +
                    std::to_string(qhi) + "]");
  }
  GridCdf F(grid.x, grid.values);
  GofResult r;
  r.n = s.size();
  r.missing_mass = 1.0 - F.total();
  F.left = 0.5 * r.missing_mass;
  const double n = static_cast<double>(s.size());
  double ks = 0.0, cvm = 1.0 / (12.0 * n);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = F(s[i]);
    ks = std::max({ks, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    const double d = f - (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n);
    cvm += d * d;
  }
  r.ks_stat = ks;
  r.cvm_stat = cvm;
  r.threshold = 1.5 * 1.63 / std::sqrt(n);
  r.pass = ks <= r.threshold;
  return r;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidParameters, "two-sample KS needs data on both sides");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

std::vector<double> sample_from_grid(const DensityGrid& grid, std::size_t n, std::uint64_t seed) {
  check_grid(grid);
  const GridCdf F(grid.x, grid.values);
  const auto& x = grid.x;
  const auto& p = grid.values;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Philox g(seed, i);
    const double target = g.uniform() * F.total();
    std::size_t j = static_cast<std::size_t>(std::upper_bound(F.cum.begin(), F.cum.end(), target) - F.cum.begin());
    j = std::clamp<std::size_t>(j, 1, x.size() - 1) - 1;
    // Solve cum_j + p_j s + (p_{j+1} - p_j) s^2 / (2h) = target on the cell.
    const double h = x[j + 1] - x[j];
    const double a = 0.5 * (p[j + 1] - p[j]) / h, b = p[j], c = F.cum[j] - target;
    double s;
    if (std::abs(a) * h < 1e-12 * std::abs(b) + 1e-300) {
      s = b > 0.0 ? -c / b : 0.5 * h;
    } else {
      const double disc = std::max(0.0, b * b - 4.0 * a * c);
      s = 2.0 * (-c) / (b + std::sqrt(disc));
    }
    out[i] = x[j] + std::clamp(s, 0.0, h);
  }
  return out;
}

nlohmann::json run_to_json(const SampleRun& run) {
  nlohmann::json j;
  j["spec_hash"] = run.spec_hash;
  j["t"] = run.t;
  j["n"] = run.samples.size();
  j["seed"] = run.config.seed;
  j["scheme"] = to_string(run.config.scheme);
  j["delta"] = run.delta;
  j["sigma_small"] = run.sigma_small;
  j["sigma_over_delta"] = run.sigma_small / run.delta;
  j["jump_rate"] = run.jump_rate;
  j["shift"] = run.shift;
  if (!run.samples.empty()) {
    const SampleStats st = sample_stats(run.samples);
    j["stats"] = {{"mean", st.mean}, {"stddev", st.stddev}, {"median", st.median}, {"q0005", st.q_lo},
                  {"q9995", st.q_hi}};
  }
  return j;
}

nlohmann::json gof_to_json(const GofResult& g) {
  return {{"n", g.n},
          {"ks_stat", g.ks_stat},
          {"cvm_stat", g.cvm_stat},
          {"threshold", g.threshold},
          {"missing_mass", g.missing_mass},
          {"pass", g.pass}};
}

// ------------------------------------------------------------- binary dump

namespace {

template <class U>
void put(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw Error(ErrorCode::IoError, "truncated sample dump");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

void put_double(std::ostream& os, double d) { put(os, std::bit_cast<std::uint64_t>(d)); }
double get_double(std::istream& is) { return std::bit_cast<double>(get<std::uint64_t>(is)); }

constexpr std::uint32_t kDumpVersion = 1;

}  // namespace

void write_samples(const SampleRun& run, std::ostream& os) {
  os.write("LKBS", 4);
  put(os, kDumpVersion);
  char hash[16] = {};
  std::memcpy(hash, run.spec_hash.data(), std::min<std::size_t>(16, run.spec_hash.size()));
  os.write(hash, 16);
  put_double(os, run.t);
  put_double(os, run.delta);
  put(os, run.config.seed);
  put(os, static_cast<std::uint32_t>(run.config.scheme));
  put(os, static_cast<std::uint64_t>(run.samples.size()));
  for (double v : run.samples) put_double(os, v);
  if (!os) throw Error(ErrorCode::IoError, "failed to write sample dump");
}

SampleRun read_samples(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "LKBS", 4) != 0) throw Error(ErrorCode::IoError, "not a sample dump");
  if (get<std::uint32_t>(is) != kDumpVersion) throw Error(ErrorCode::IoError, "unsupported sample dump version");
  SampleRun run;
  char hash[16];
  if (!is.read(hash, 16)) throw Error(ErrorCode::IoError, "truncated sample dump");
  run.spec_hash.assign(hash, strnlen(hash, 16));
  run.t = get_double(is);
  run.delta = get_double(is);
  run.config.delta = run.delta;
  run.config.seed = get<std::uint64_t>(is);
  const auto scheme = get<std::uint32_t>(is);
  if (scheme > 1) throw Error(ErrorCode::IoError, "bad scheme in sample dump");
  run.config.scheme = static_cast<SamplerScheme>(scheme);
  const auto n = get<std::uint64_t>(is);
  run.config.n_samples = n;
  run.samples.resize(n);
  for (auto& v : run.samples) v = get_double(is);
  return run;
}

}  // namespace levykb
