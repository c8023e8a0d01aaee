#include "levykb/scales.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/numerics.hpp"

namespace levykb {

namespace {

constexpr double kXiLo = 1e-8;
constexpr double kScanPerOctave = 4.0;

double evaluate(const LevyMeasure& mu, ScaleKind kind, double xi) {
  switch (kind) {
    case ScaleKind::Re: return mu.re_psi(xi);
    case ScaleKind::Upper: return psi_U(mu, xi);
    case ScaleKind::Lower: return psi_L(mu, xi);
  }
  return 0.0;
}

// Scan points on [lo, hi]: log grid plus, for atomic measures, points just
// left of every frequency 1/|u| where an atom changes the integrands.
std::vector<double> scan_points(const LevyMeasure& mu, double lo, double hi) {
  const std::size_t n = static_cast<std::size_t>(std::ceil(std::log2(hi / lo) * kScanPerOctave)) + 1;
  std::vector<double> pts = numerics::logspace(lo, hi, std::max<std::size_t>(n, 2));
  if (mu.atomic()) {
    for (const Atom& a : mu.atoms_in(1.0 / hi, 1.0 / lo)) {
      if (a.position > 0.0) {
        const double x = 1.0 / a.position;
        pts.push_back(x * (1.0 - 1e-12));
        pts.push_back(x);
      }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::remove_if(pts.begin(), pts.end(), [&](double x) { return x < lo || x > hi; }),
              pts.end());
  }
  return pts;
}

}  // namespace

ScaleResult scale(const LevyMeasure& mu, double t, ScaleKind kind) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidParameters, "t must be > 0");
  const double target = 1.0 / t;
  const auto f = [&](double xi) { return evaluate(mu, kind, xi); };

  double lo = kXiLo;
  while (f(lo) >= target) {
    lo *= 1e-4;
    if (lo < 1e-300) throw Error(ErrorCode::BracketFailure, "f >= 1/t down to xi = 1e-300");
  }
  double hi = 1.0;
  int doublings = 0;
  while (f(hi) < target) {
    hi *= 2.0;
    if (++doublings > 200) {
      throw Error(ErrorCode::BracketFailure,
                  "exponent stays below 1/t=" + std::to_string(target) + " up to xi = 2^200");
    }
  }

  // First crossing on the scan, so non-monotone exponents give the infimum.
  const auto pts = scan_points(mu, lo, hi);
  double a = lo, b = hi;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (f(pts[i]) >= target) {
      a = pts[i - 1];
      b = pts[i];
      break;
    }
  }
  double fb = f(b);
  for (int it = 0; it < 200; ++it) {
    if (b - a <= 1e-15 * b) break;
    if (std::abs(fb - target) <= 1e-12 * target && b - a <= 1e-10 * b) break;
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if (fm >= target) {
      b = mid;
      fb = fm;
    } else {
      a = mid;
    }
  }
  return {b, b - a, fb};
}

double rho(const LevyMeasure& mu, double t) { return scale(mu, t, ScaleKind::Re).value; }
double rho_U(const LevyMeasure& mu, double t) { return scale(mu, t, ScaleKind::Upper).value; }
double rho_L(const LevyMeasure& mu, double t) { return scale(mu, t, ScaleKind::Lower).value; }

std::vector<double> default_scale_grid() { return numerics::logspace(1e-6, 1.0, 25); }

ScaleTable scale_table(const LevyMeasure& mu, const std::vector<double>& t_grid) {
  ScaleTable tab;
  tab.t = t_grid;
  std::sort(tab.t.begin(), tab.t.end());
  for (double t : tab.t) {
    const auto r = scale(mu, t, ScaleKind::Re);
    const auto u = scale(mu, t, ScaleKind::Upper);
    const auto l = scale(mu, t, ScaleKind::Lower);
    tab.rho.push_back(r.value);
    tab.rho_U.push_back(u.value);
    tab.rho_L.push_back(l.value);
    tab.bracket_width.push_back(r.bracket_width);
    tab.bracket_width_U.push_back(u.bracket_width);
    tab.bracket_width_L.push_back(l.bracket_width);
  }
  return tab;
}

ComparabilityReport comparability_report(const LevyMeasure& mu, const std::vector<double>& t_grid,
                                         const std::vector<double>& c_list) {
  const ScaleTable tab = scale_table(mu, t_grid);
  ComparabilityReport rep;
  const auto band = [](const std::string& name, double c, const std::vector<double>& ratios) {
    ComparabilityRow row{name, c, std::numeric_limits<double>::infinity(), 0.0};
    for (double r : ratios) {
      row.min_ratio = std::min(row.min_ratio, r);
      row.max_ratio = std::max(row.max_ratio, r);
    }
    return row;
  };
  std::vector<double> ru, rl, ul;
  for (std::size_t i = 0; i < tab.t.size(); ++i) {
    ru.push_back(tab.rho_U[i] / tab.rho[i]);
    rl.push_back(tab.rho_L[i] / tab.rho[i]);
    ul.push_back(tab.rho_L[i] / tab.rho_U[i]);
  }
  rep.rows.push_back(band("rho_U/rho", 1.0, ru));
  rep.rows.push_back(band("rho_L/rho", 1.0, rl));
  rep.rows.push_back(band("rho_L/rho_U", 1.0, ul));
  for (double c : c_list) {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidParameters, "comparability constants must be > 0");
    std::vector<double> rc;
    for (std::size_t i = 0; i < tab.t.size(); ++i) rc.push_back(rho(mu, c * tab.t[i]) / tab.rho[i]);
    rep.rows.push_back(band("rho_ct/rho_t", c, rc));
  }
  rep.pass = std::all_of(rep.rows.begin(), rep.rows.end(), [](const ComparabilityRow& r) {
    return std::isfinite(r.min_ratio) && std::isfinite(r.max_ratio) && r.min_ratio > 0.0;
  });
  return rep;
}

void write_scale_csv(const ScaleTable& table, std::ostream& os) {
  os << "t,rho,rho_U,rho_L,bracket_width\n" << std::setprecision(17);
  for (std::size_t i = 0; i < table.t.size(); ++i) {
    os << table.t[i] << ',' << table.rho[i] << ',' << table.rho_U[i] << ',' << table.rho_L[i] << ','
       << table.bracket_width[i] << '\n';
  }
}

}  // namespace levykb
