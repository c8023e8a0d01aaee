#include "levykb/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>

#include "levykb/error.hpp"
#include "levykb/numerics.hpp"

namespace levykb {

const char* const kConditionACaveat =
    "Condition A is a statement over all xi in R; this report certifies it only on the (extended) "
    "grid.";

double psi_L(const LevyMeasure& mu, double xi) {
  const double ax = std::abs(xi);
  if (ax == 0.0) return 0.0;
  return ax * ax * mu.second_moment_below(1.0 / ax, true);
}

double psi_U(const LevyMeasure& mu, double xi) {
  const double ax = std::abs(xi);
  if (ax == 0.0) return 0.0;
  return ax * ax * mu.second_moment_below(1.0 / ax, true) + mu.tail_mass(1.0 / ax, true);
}

std::vector<double> default_beta_grid() { return numerics::logspace(1e-3, 1e6, 9 * 60 + 1); }

namespace {

double ratio_at(const LevyMeasure& mu, double xi) {
  const double l = psi_L(mu, xi);
  if (!(l > 0.0)) return std::numeric_limits<double>::infinity();
  return psi_U(mu, xi) / l;
}

// Two decades beyond `edge`, same density as the base grid, edge excluded.
std::vector<double> extension(double edge, double per_decade, bool upward) {
  const std::size_t n = static_cast<std::size_t>(std::lround(2.0 * per_decade));
  std::vector<double> out;
  for (std::size_t k = 1; k <= n; ++k) {
    const double e = 2.0 * static_cast<double>(k) / static_cast<double>(n);
    out.push_back(edge * std::pow(10.0, upward ? e : -e));
  }
  return out;
}

}  // namespace

BetaEstimate estimate_beta(const LevyMeasure& mu, const std::vector<double>& xi_grid) {
  std::vector<double> grid;
  for (double x : xi_grid) {
    if (x == 0.0) throw Error(ErrorCode::InvalidParameters, "beta grid must exclude xi = 0");
    grid.push_back(std::abs(x));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw Error(ErrorCode::InvalidParameters, "empty beta grid");

  BetaEstimate est;
  std::vector<double> ratio(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) ratio[i] = ratio_at(mu, grid[i]);
  const auto update_max = [&](double xi, double r) {
    if (!std::isfinite(r)) {
      throw Error(ErrorCode::ConditionAViolated,
                  "psi^L vanishes at xi=" + std::to_string(xi) + " while psi^U does not");
    }
    if (r > est.beta_hat) {
      est.beta_hat = r;
      est.argmax_xi = xi;
    }
  };
  for (std::size_t i = 0; i < grid.size(); ++i) update_max(grid[i], ratio[i]);

  const double per_decade =
      grid.size() > 1 ? (grid.size() - 1) / std::log10(grid.back() / grid.front()) : 60.0;
  double lo = grid.front(), hi = grid.back();
  double r_lo = ratio.front(), r_hi = ratio.back();

  // Each side may be extended repeatedly while the edge stays near the max;
  // growth over an extension means the sup is not attained on the grid.
  for (const bool upward : {false, true}) {
    for (int round = 0; round < 3; ++round) {
      const double edge_ratio = upward ? r_hi : r_lo;
      if (edge_ratio < 0.95 * est.beta_hat) break;
      const double before = est.beta_hat;
      const auto ext = extension(upward ? hi : lo, std::max(per_decade, 10.0), upward);
      std::vector<double> vals;
      for (double x : ext) {
        vals.push_back(ratio_at(mu, x));
        update_max(x, vals.back());
      }
      (upward ? est.extensions_high : est.extensions_low) += 1;
      (upward ? hi : lo) = ext.back();
      (upward ? r_hi : r_lo) = vals.back();
      const bool monotone = std::is_sorted(vals.begin(), vals.end());
      if (est.beta_hat > 1.05 * before && monotone) {
        (upward ? est.growing_high : est.growing_low) = true;
        throw Error(ErrorCode::ConditionAViolated,
                    std::string("psi^U/psi^L keeps growing over a two-decade extension toward ") +
                        (upward ? "high" : "low") + " frequencies (max " +
                        std::to_string(est.beta_hat) + ")");
      }
      if (est.beta_hat <= before * (1.0 + 1e-9)) break;
    }
  }
  est.xi_lo = lo;
  est.xi_hi = hi;
  return est;
}

double growth_floor(const LevyMeasure& mu, double beta_hat, const std::vector<double>& xi_grid) {
  if (!(beta_hat >= 1.0)) throw Error(ErrorCode::InvalidParameters, "beta_hat must be >= 1");
  double c = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double x : xi_grid) {
    const double ax = std::abs(x);
    if (ax < 1.0) continue;
    any = true;
    c = std::min(c, mu.re_psi(ax) / std::pow(ax, 2.0 / beta_hat));
  }
  if (!any) throw Error(ErrorCode::InvalidParameters, "growth floor grid has no |xi| >= 1");
  if (!(c > 1e-12)) {
    throw Error(ErrorCode::FloorViolated, "growth floor constant " + std::to_string(c) + " <= 1e-12");
  }
  return c;
}

ExponentProfile exponent_profile(const LevyMeasure& mu, const std::vector<double>& magnitudes) {
  std::vector<double> mags;
  for (double x : magnitudes) {
    if (!(x > 0.0)) throw Error(ErrorCode::InvalidParameters, "profile magnitudes must be > 0");
    mags.push_back(x);
  }
  std::sort(mags.begin(), mags.end());
  ExponentProfile p;
  p.beta = estimate_beta(mu, mags);
  p.c_floor = growth_floor(mu, p.beta.beta_hat, mags.back() >= 1.0 ? mags : std::vector<double>{1.0});

  const std::size_t n = mags.size();
  std::vector<double> re(n), im(n), l(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = mu.re_psi(mags[i]);
    im[i] = mu.im_psi(mags[i]);
    l[i] = psi_L(mu, mags[i]);
    u[i] = psi_U(mu, mags[i]);
  }
  // Negative side by exact parity: Re, psi^L, psi^U even; Im odd.
  for (std::size_t k = n; k-- > 0;) {
    p.xi.push_back(-mags[k]);
    p.re_psi.push_back(re[k]);
    p.im_psi.push_back(-im[k]);
    p.psi_L.push_back(l[k]);
    p.psi_U.push_back(u[k]);
  }
  p.xi.push_back(0.0);
  p.re_psi.push_back(0.0);
  p.im_psi.push_back(0.0);
  p.psi_L.push_back(0.0);
  p.psi_U.push_back(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    p.xi.push_back(mags[k]);
    p.re_psi.push_back(re[k]);
    p.im_psi.push_back(im[k]);
    p.psi_L.push_back(l[k]);
    p.psi_U.push_back(u[k]);
  }
  return p;
}

GrowthConstants growth_constants(const LevyMeasure& mu) {
  static std::mutex mutex;
  static std::map<std::string, GrowthConstants> memo;
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = memo.find(mu.hash()); it != memo.end()) return it->second;
  }
  const auto grid = default_beta_grid();
  const BetaEstimate b = estimate_beta(mu, grid);
  const GrowthConstants gc{b.beta_hat, growth_floor(mu, b.beta_hat, grid)};
  std::lock_guard<std::mutex> lock(mutex);
  memo[mu.hash()] = gc;
  return gc;
}

void write_profile_csv(const ExponentProfile& p, std::ostream& os) {
  os << "xi,re_psi,im_psi,psi_L,psi_U,ratio\n" << std::setprecision(17);
  for (std::size_t i = 0; i < p.xi.size(); ++i) {
    os << p.xi[i] << ',' << p.re_psi[i] << ',' << p.im_psi[i] << ',' << p.psi_L[i] << ','
       << p.psi_U[i] << ',';
    if (p.psi_L[i] > 0.0) os << p.psi_U[i] / p.psi_L[i];
    os << '\n';
  }
}

}  // namespace levykb
