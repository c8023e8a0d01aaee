#include "levykb/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "levykb/error.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

namespace levykb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// mu((x, inf)) on one side for x > 0.
double side_tail(const LevyMeasure& mu, double x, bool positive) {
  const double tail = mu.tail_mass(x, false);
  if (mu.symmetric()) return 0.5 * tail;
  return positive ? tail : 0.0;
}

void merge_sorted(std::vector<Atom>& atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.position < b.position; });
  std::vector<Atom> out;
  out.reserve(atoms.size());
  for (const Atom& a : atoms) {
    if (!out.empty() &&
        std::abs(a.position - out.back().position) <=
            1e-12 * std::max({1.0, std::abs(a.position), std::abs(out.back().position)})) {
      out.back().weight += a.weight;
    } else {
      out.push_back(a);
    }
  }
  atoms.swap(out);
}

}  // namespace

Decomposition build_decomposition(const LevyMeasure& mu, double t) {
  return build_decomposition(mu, t, rho(mu, t));
}

Decomposition build_decomposition(const LevyMeasure& mu, double t, double rho_t) {
  if (!(t > 0.0) || !(rho_t > 0.0)) {
    throw Error(ErrorCode::InvalidParameters, "decomposition needs t > 0 and rho_t > 0");
  }
  Decomposition dec{mu, t, rho_t, 1.0 / rho_t, 0.0, 0.0, {}};
  dec.lambda_total = t * mu.tail_mass(dec.radius, false);
  dec.a_t = t * (mu.drift() + mu.compensator_shift(dec.radius));
  if (mu.atomic()) {
    for (Atom a : mu.atoms_in(dec.radius, kInf)) {
      a.weight *= t;
      dec.atoms.push_back(a);
    }
    merge_sorted(dec.atoms);
  }
  return dec;
}

std::complex<double> psi_t(const Decomposition& dec, double xi) {
  if (xi == 0.0) return 0.0;
  return dec.t * dec.mu.psi_small(xi, dec.radius);
}

std::complex<double> lambda_t_hat(const Decomposition& dec, double xi) {
  if (!dec.atoms.empty()) {
    std::complex<double> s = 0.0;
    for (const Atom& a : dec.atoms) s += a.weight * std::polar(1.0, xi * a.position);
    return s;
  }
  return dec.t * dec.mu.lambda_hat(xi, dec.radius);
}

std::complex<double> poisson_cf(const Decomposition& dec, double xi) {
  return std::exp(lambda_t_hat(dec, xi) - dec.lambda_total);
}

GridMeasure lambda_cells(const Decomposition& dec, double dx, double half_width) {
  if (!(dx > 0.0) || !(half_width > 0.0)) {
    throw Error(ErrorCode::InvalidParameters, "lambda_cells needs dx > 0 and half_width > 0");
  }
  const long kmax = static_cast<long>(std::floor(half_width / dx));
  GridMeasure g{-static_cast<double>(kmax) * dx, dx, std::vector<double>(2 * kmax + 1, 0.0)};
  if (dec.mu.atomic()) {
    for (const Atom& a : dec.atoms) {
      const long k = std::lround(a.position / dx);
      if (std::labs(k) <= kmax) g.mass[static_cast<std::size_t>(k + kmax)] += a.weight;
    }
    return g;
  }
  // Exact cell masses from differences of the one-sided tail.
  for (const bool positive : {true, false}) {
    double prev = side_tail(dec.mu, dec.radius, positive);
    for (long k = 1; k <= kmax; ++k) {
      const double hi = (static_cast<double>(k) + 0.5) * dx;
      if (hi <= dec.radius) continue;
      const double cur = side_tail(dec.mu, hi, positive);
      const double m = dec.t * (prev - cur);
      prev = cur;
      g.mass[static_cast<std::size_t>(positive ? kmax + k : kmax - k)] += m;
    }
  }
  return g;
}

int poisson_m_max(double lambda_total, double tol) {
  return numerics::poisson_terms_for(lambda_total, tol, std::exp(lambda_total));
}

PoissonLaw poisson_law(const Decomposition& dec, int m_max, const PoissonOptions& opts) {
  if (m_max < 0) throw Error(ErrorCode::InvalidParameters, "m_max must be >= 0");
  PoissonLaw law;
  law.m_max = m_max;
  law.lambda_total = dec.lambda_total;
  const double e = std::exp(-dec.lambda_total);
  law.tail_bound = e * numerics::poisson_series_tail(dec.lambda_total, m_max);
  if (law.tail_bound > opts.tol) {
    throw Error(ErrorCode::TruncationInsufficient,
                "Poisson tail " + std::to_string(law.tail_bound) + " at m_max=" +
                    std::to_string(m_max) + " exceeds " + std::to_string(opts.tol));
  }
  double w = e;
  for (int m = 0; m <= m_max; ++m) {
    law.term_mass.push_back(w);
    w *= dec.lambda_total / (m + 1);
  }
  law.delta0 = e;
  const double window = opts.window > 0.0 ? opts.window : 200.0 * dec.radius;

  if (dec.mu.atomic()) {
    // Far partial sums survive only while they could still return to the
    // window with non-negligible weight: w(y) * Lambda_t(|u| >= |y| - window).
    const auto keep = [&](const Atom& a) {
      if (a.weight < opts.prune_weight) return false;
      const double far = std::abs(a.position) - window;
      if (far <= 0.0) return true;
      const double back = dec.t * dec.mu.tail_mass(far, true);
      return a.weight * back * m_max >= opts.prune_weight;
    };
    std::vector<Atom> power{{0.0, 1.0}};  // Lambda_t^{*m} / m!
    std::vector<Atom> combined{{0.0, e}};
    if (opts.keep_terms) law.terms.push_back({{0.0, e}});
    for (int m = 1; m <= m_max; ++m) {
      std::vector<Atom> next;
      next.reserve(power.size() * dec.atoms.size());
      for (const Atom& p : power) {
        for (const Atom& a : dec.atoms) {
          const double w = p.weight * a.weight / m;
          if (w >= opts.prune_weight) next.push_back({p.position + a.position, w});
        }
      }
      merge_sorted(next);
      std::vector<Atom> kept;
      kept.reserve(next.size());
      for (const Atom& a : next) {
        if (keep(a)) kept.push_back(a);
      }
      power.swap(kept);
      std::vector<Atom> term;
      for (const Atom& p : power) {
        if (std::abs(p.position) <= window) term.push_back({p.position, e * p.weight});
      }
      combined.insert(combined.end(), term.begin(), term.end());
      if (opts.keep_terms) law.terms.push_back(std::move(term));
    }
    merge_sorted(combined);
    law.atoms = std::move(combined);
    double total = law.tail_bound;
    for (const Atom& a : law.atoms) total += a.weight;
    law.dropped_mass = std::max(0.0, 1.0 - total);
    return law;
  }

  const double dx = opts.dx > 0.0 ? opts.dx : 0.05 * dec.radius;
  const GridMeasure cells = lambda_cells(dec, dx, window);
  const std::size_t half = (cells.mass.size() - 1) / 2;
  std::vector<double> power = cells.mass;  // Lambda^{*m}/m!, centred at index half
  std::vector<double> combined(cells.mass.size(), 0.0);
  for (std::size_t i = 0; i < power.size(); ++i) combined[i] += e * power[i];
  for (int m = 2; m <= m_max; ++m) {
    auto full = numerics::linear_convolve(power, cells.mass);
    // full is centred at 2 half; crop back to the window
    std::vector<double> cropped(cells.mass.size());
    for (std::size_t i = 0; i < cropped.size(); ++i) cropped[i] = full[i + half] / m;
    power.swap(cropped);
    for (std::size_t i = 0; i < power.size(); ++i) combined[i] += e * power[i];
  }
  law.grid = GridMeasure{cells.x0, dx, std::move(combined)};
  double total = law.delta0 + law.tail_bound;
  for (double v : law.grid.mass) total += v;
  law.dropped_mass = std::max(0.0, 1.0 - total);
  return law;
}

nlohmann::json decomposition_to_json(const Decomposition& dec) {
  nlohmann::json j;
  j["spec"] = spec_to_json(dec.mu.spec());
  j["t"] = dec.t;
  j["rho_t"] = dec.rho_t;
  j["radius"] = dec.radius;
  j["lambda_total"] = dec.lambda_total;
  j["a_t"] = dec.a_t;
  if (dec.mu.atomic()) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const Atom& a : dec.atoms) atoms.push_back({a.position, a.weight});
    j["lambda_atoms"] = atoms;
  } else {
    // Lambda_t tail masses on a log grid of radii beyond 1/rho_t.
    nlohmann::json table = nlohmann::json::array();
    for (double r : numerics::logspace(dec.radius, dec.radius * 1e6, 61)) {
      table.push_back({r, dec.t * dec.mu.tail_mass(r, false)});
    }
    j["lambda_tail_table"] = table;
  }
  return j;
}

}  // namespace levykb
