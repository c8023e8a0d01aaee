#include "levykb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "levykb/decomposition.hpp"
#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

namespace levykb {

namespace {



std::vector<double> grid_from_json(const nlohmann::json& j, const char* what) {
  if (j.is_string()) return parse_log_grid(j.get<std::string>());
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    return numerics::logspace(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("n").get<std::size_t>());
  }
  throw Error(ErrorCode::InvalidParameters, std::string("cannot read ") + what + " grid");
}

}  // namespace

// ------------------------------------------------------------------ config

std::vector<double> parse_log_grid(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  try {
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidParameters, "grid '" + s + "' is not of the form a:b:n");
  }
  if (parts.size() == 1) return {parts[0]};
  if (parts.size() != 3 || !(parts[0] > 0.0) || !(parts[1] >= parts[0]) || parts[2] < 1.0 ||
      parts[2] != std::floor(parts[2])) {
    throw Error(ErrorCode::InvalidParameters, "grid '" + s + "' needs 0 < a <= b and integer n >= 1");
  }
  const auto n = static_cast<std::size_t>(parts[2]);
  if (n == 1) return {parts[0]};
  return numerics::logspace(parts[0], parts[1], n);
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParameters, "config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("spec")) c.spec = j.at("spec");
    if (j.contains("spec_params")) c.spec_params = j.at("spec_params");
    c.t0 = j.value("t0", c.t0);
    if (j.contains("t_grid")) c.t_grid = grid_from_json(j.at("t_grid"), "t");
    if (j.contains("t")) c.t = j.at("t").get<double>();
    c.x_points = j.value("x_points", c.x_points);
    c.half_width = j.value("half_width", c.half_width);
    if (j.contains("xi_grid")) c.xi_grid = grid_from_json(j.at("xi_grid"), "xi");
    if (j.contains("k")) c.k = j.at("k").is_array() ? j.at("k").get<std::vector<int>>() : std::vector<int>{j.at("k").get<int>()};
    if (j.contains("tail") && !j.at("tail").is_null()) c.tail = TailSpec::from_json(j.at("tail"));
    c.mc_n = j.value("mc_n", c.mc_n);
    c.seed = j.value("seed", c.seed);
    if (j.contains("delta") && !j.at("delta").is_null()) c.delta = j.at("delta").get<double>();
    if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.out_dir = j.value("out", c.out_dir);
    c.format = j.value("format", c.format);
    c.rel_trunc = j.value("rel_trunc", c.rel_trunc);
    c.alias_tol = j.value("alias_tol", c.alias_tol);
    c.verify = j.value("verify", c.verify);
    c.convolution_check = j.value("convolution_check", c.convolution_check);
    if (j.contains("estimates")) c.estimates = j.at("estimates").get<std::vector<std::string>>();
    c.example = j.value("example", c.example);
    if (j.contains("example_params")) c.example_params = j.at("example_params");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParameters, std::string("bad config: ") + e.what());
  }
  return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["spec"] = c.spec;
  j["spec_params"] = c.spec_params;
  j["t0"] = c.t0;
  j["t_grid"] = effective_t_grid(c);
  if (c.t) j["t"] = *c.t;
  j["x_points"] = c.x_points;
  j["half_width"] = c.half_width;
  if (!c.xi_grid.empty()) j["xi_grid"] = c.xi_grid;
  j["k"] = c.k;
  if (c.tail) j["tail"] = c.tail->to_json();
  j["mc_n"] = c.mc_n;
  j["seed"] = c.seed;
  if (c.delta) j["delta"] = *c.delta;
  j["scheme"] = to_string(c.scheme);
  j["format"] = c.format;
  j["rel_trunc"] = c.rel_trunc;
  j["alias_tol"] = c.alias_tol;
  j["verify"] = c.verify;
  j["convolution_check"] = c.convolution_check;
  if (!c.estimates.empty()) j["estimates"] = c.estimates;
  if (!c.example.empty()) j["example"] = c.example;
  j["example_params"] = c.example_params;
  return j;
}

std::vector<double> effective_t_grid(const RunConfig& c) {
  return c.t_grid.empty() ? numerics::logspace(1e-4 * c.t0, c.t0, 25) : c.t_grid;
}

void check_config(const RunConfig& c) {
  if (!(c.t0 > 0.0)) throw Error(ErrorCode::InvalidParameters, "t0 must be positive");
  const auto tg = effective_t_grid(c);
  if (tg.empty()) throw Error(ErrorCode::InvalidParameters, "t grid is empty");
  for (double t : tg) {
    if (!(t > 0.0) || t > c.t0 * (1.0 + 1e-12)) {
      throw Error(ErrorCode::InvalidParameters, "t grid must lie in (0, t0]; got " + std::to_string(t));
    }
  }
  if (c.t && (!(*c.t > 0.0) || *c.t > c.t0 * (1.0 + 1e-12))) {
    throw Error(ErrorCode::InvalidParameters, "t must lie in (0, t0]");
  }
  if (c.x_points < 3) throw Error(ErrorCode::InvalidParameters, "x_points must be >= 3");
  if (!(c.half_width > 0.0)) throw Error(ErrorCode::InvalidParameters, "half_width must be positive");
  for (double v : c.xi_grid) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidParameters, "xi grid magnitudes must be positive");
  }
  for (int k : c.k) {
    if (k < 0 || k > 2) throw Error(ErrorCode::InvalidParameters, "k must be 0, 1 or 2");
  }
  if (c.k.empty()) throw Error(ErrorCode::InvalidParameters, "k list is empty");
  if (c.format != "json" && c.format != "csv") throw Error(ErrorCode::InvalidParameters, "format must be json or csv");
  if (c.mc_n < 1) throw Error(ErrorCode::InvalidParameters, "mc_n must be >= 1");
}

LevyMeasure config_measure(const RunConfig& c) {
  if (c.spec.is_object()) return LevyMeasure(spec_from_json(c.spec));
  if (!c.spec.is_string()) throw Error(ErrorCode::InvalidParameters, "spec must be a string or an object");
  const std::string s = c.spec.get<std::string>();
  if (!c.spec_params.empty()) return LevyMeasure(preset(s, c.spec_params));
  return LevyMeasure(resolve_spec(s));
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Marginal: return 2;
    case Verdict::Fail: return 1;
  }
  return 1;
}

// -------------------------------------------------------------- invariants

namespace {

InvariantResult inv(std::string name, bool pass, double value, double tol, std::string detail = {}) {
  return {std::move(name), pass, value, tol, std::move(detail)};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// P(a < Z_t < b) from the characteristic function e^{-t psi}, continuous quadrature on [0, xi_max].
double interval_probability(const LevyMeasure& mu, double t, double a, double b, double xi_max) {
  const auto f = [&](double xi) {
    if (xi == 0.0) return b - a;
    const std::complex<double> phi = std::exp(-t * mu.psi(xi));
    const std::complex<double> w = (std::exp(std::complex<double>(0.0, -xi * a)) -
                                    std::exp(std::complex<double>(0.0, -xi * b))) /
                                   std::complex<double>(0.0, xi);
    return (phi * w).real();
  };
  const double panel = std::numbers::pi / std::max(std::abs(a), std::abs(b));
  double sum = 0.0;
  for (double lo = 0.0; lo < xi_max; lo += panel) {
    sum += numerics::integrate(f, lo, std::min(lo + panel, xi_max), 1e-10, 1e-12).value;
  }
  return sum / std::numbers::pi;
}

// Endpoint-corrected trapezoid of p_t (or pbar_t) over [a, b].
double grid_mass(const LevyMeasure& mu, double t, double a, double b, std::size_t n, const DensityOptions& o,
                 bool bar) {
  const auto x = numerics::linspace(a, b, n);
  const auto f = bar ? density_bar : density;
  const DensityGrid g = f(mu, t, x, 0, o);
  const DensityGrid d = f(mu, t, std::vector<double>{a, b}, 1, o);
  const double h = (b - a) / static_cast<double>(n - 1);
  double s = 0.5 * (g.values.front() + g.values.back());
  for (std::size_t i = 1; i + 1 < n; ++i) s += g.values[i];
  return h * s - h * h / 12.0 * (d.values[1] - d.values[0]);
}

// psi^L jumps where 1/xi crosses an atom.
std::vector<double> psi_l_breaks(const LevyMeasure& mu, double x1, double x2) {
  std::vector<double> br;
  if (!mu.atomic()) return br;
  for (const Atom& a : mu.atoms_in(1.0 / x2, 1.0 / x1)) br.push_back(1.0 / std::abs(a.position));
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

}  // namespace

std::vector<InvariantResult> run_invariants(const LevyMeasure& mu, const InvariantOptions& opts) {
  std::vector<InvariantResult> out;
  const auto xi = opts.xi_grid.empty() ? default_beta_grid() : opts.xi_grid;
  const auto tg = opts.t_grid.empty() ? numerics::logspace(1e-4, 1.0, 7) : opts.t_grid;
  const auto want = [&](const char* g) {
    return opts.groups.empty() || std::find(opts.groups.begin(), opts.groups.end(), g) != opts.groups.end();
  };
  const ExponentProfile prof = exponent_profile(mu, xi);

  // Sandwich (1 - cos 1) psi^L <= Re psi <= 2 psi^U.
  if (want("exponents")) {
    const double c1 = 1.0 - std::cos(1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < prof.xi.size(); ++i) {
      const double re = prof.re_psi[i], lo = c1 * prof.psi_L[i], hi = 2.0 * prof.psi_U[i];
      const double scale = std::max(std::abs(re), 1e-300);
      worst = std::max({worst, (lo - re) / scale, (re - hi) / scale});
    }
    out.push_back(inv("sandwich", worst <= 1e-10, worst, 1e-10, "max relative excess over the xi grid"));
  }

  // Doubling growth psi^U(x2)/psi^U(x1) >= (x2/x1)^{2/beta} for grid pairs.
  if (want("exponents")) {
    const BetaEstimate be = estimate_beta(mu, xi);
    const double p = 2.0 / be.beta_hat;
    double run = -std::numeric_limits<double>::infinity(), worst = 0.0;
    for (double x : xi) {
      const double g = std::log(psi_U(mu, x)) - p * std::log(x);
      if (std::isfinite(run)) worst = std::max(worst, run - g);
      run = std::max(run, g);
    }
    const double tol = std::log1p(1e-8);
    out.push_back(inv("doubling_growth", worst <= tol, std::expm1(worst), 1e-8,
                      "beta_hat = " + num(be.beta_hat) + "; worst ratio shortfall over grid pairs"));
  }

  // psi^U(x2) - psi^U(x1) = int_{x1}^{x2} (2/eta) psi^L(eta) d eta.
  if (want("exponents")) {
    double worst = 0.0;
    for (const auto& [x1, x2] : std::vector<std::pair<double, double>>{{0.1, 1.0}, {1.0, 10.0}, {10.0, 100.0}}) {
      auto pts = psi_l_breaks(mu, x1, x2);
      pts.insert(pts.begin(), x1);
      pts.push_back(x2);
      double rhs = 0.0;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] <= pts[i]) continue;
        const auto f = [&](double le) {
          const double eta = std::exp(le);
          return 2.0 * psi_L(mu, eta);
        };
        rhs += numerics::integrate(f, std::log(pts[i]), std::log(pts[i + 1]), 1e-10).value;
      }
      const double lhs = psi_U(mu, x2) - psi_U(mu, x1);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
    out.push_back(inv("integral_relation", worst <= opts.integral_rel_tol, worst, opts.integral_rel_tol,
                      "decades [0.1,1], [1,10], [10,100]"));
  }

  // Evenness of Re psi and oddness of Im psi.
  if (want("exponents")) {
    double worst = 0.0;
    for (double x : xi) {
      const double re = mu.re_psi(x), im = mu.im_psi(x);
      const double s = std::max(std::abs(re), 1e-300);
      worst = std::max({worst, std::abs(mu.re_psi(-x) - re) / s, std::abs(mu.im_psi(-x) + im) / s});
    }
    out.push_back(inv("even_odd", worst <= 1e-12, worst, 1e-12, "relative to Re psi"));
  }

  // Odd moments vanish for symmetric measures.
  if (want("exponents") && mu.symmetric()) {
    double worst = 0.0;
    for (double lo : {1e-3, 1e-1, 1.0}) {
      const double band = mu.first_moment_band(lo, 10.0 * lo);
      const double ref = std::max(mu.second_moment_below(10.0 * lo) / lo, 1e-300);
      worst = std::max(worst, std::abs(band) / ref);
    }
    out.push_back(inv("odd_moments", worst <= 1e-12, worst, 1e-12, "first-moment bands"));
  }

  // Scales: monotone, fixed point, ordering.
  if (want("scales")) {
    const ScaleTable st = scale_table(mu, tg);
    bool mono = true, order = true;
    double fp = 0.0;
    for (std::size_t i = 0; i < st.t.size(); ++i) {
      if (i > 0 && st.rho[i] > st.rho[i - 1] * (1.0 + 1e-12)) mono = false;
      if (st.rho_U[i] > st.rho_L[i] * (1.0 + 1e-12)) order = false;
      if (!mu.atomic()) fp = std::max(fp, std::abs(st.t[i] * mu.re_psi(st.rho[i]) - 1.0));
    }
    out.push_back(inv("rho_monotone", mono, 0.0, 0.0));
    out.push_back(inv("rho_ordering", order, 0.0, 0.0, "rho_U <= rho_L"));
    if (!mu.atomic()) out.push_back(inv("rho_fixed_point", fp <= 1e-8, fp, 1e-8, "|t Re psi(rho_t) - 1|"));
  }

  // Decomposition: Poisson masses, Re psi_t <= t Re psi, characteristic-function factorization.
  if (want("decomposition")) {
    double mass = 0.0, dom = 0.0, fact = 0.0;
    for (double t : {tg.front(), tg.back()}) {
      const Decomposition dec = build_decomposition(mu, t);
      PoissonOptions po;
      po.tol = 1e-14;
      po.window = 10.0 * dec.radius;
      const PoissonLaw law = poisson_law(dec, poisson_m_max(dec.lambda_total, 1e-15), po);
      double s = law.tail_bound;
      for (double w : law.term_mass) s += w;
      mass = std::max(mass, std::abs(s - 1.0));
      for (int j = 1; j <= 20; ++j) {
        const double x = dec.rho_t * std::pow(10.0, -1.0 + 2.0 * (j - 1) / 19.0);
        const std::complex<double> pt = psi_t(dec, x);
        const double re = t * mu.re_psi(x);
        dom = std::max(dom, (pt.real() - re) / std::max(re, 1e-300));
        const std::complex<double> lhs = std::exp(-t * mu.psi(x));
        const std::complex<double> rhs =
            std::exp(-pt) * poisson_cf(dec, x) * std::exp(std::complex<double>(0.0, -x * dec.a_t));
        fact = std::max(fact, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
      }
    }
    out.push_back(inv("poisson_mass", mass <= 1e-14, mass, 1e-14, "series masses plus tail bound"));
    out.push_back(inv("psi_t_domination", dom <= 1e-10, dom, 1e-10, "Re psi_t <= t Re psi"));
    out.push_back(inv("cf_factorization", fact <= 1e-8, fact, 1e-8, "20 frequencies at two times"));
  }

  // Mass: pbar_t decays exponentially, so a wide trapezoid must give 1. For
  // p_t, the trapezoid on [-R, R] plus the tail from the characteristic function.
  if (want("density")) {
    double worst = 0.0;
    std::string skipped;
    for (double t : {tg.front(), tg.back()}) {
      const double r = rho(mu, t);
      DensityOptions o;
      o.rho_t = r;
      worst = std::max(worst, std::abs(grid_mass(mu, t, -20.0 / r, 20.0 / r, 40001, o, true) - 1.0));
      const double R = 5.0 / r;
      const DensityGrid probe = density(mu, t, std::vector<double>{0.0}, 0, o);
      const double inner = grid_mass(mu, t, -R, R, 40001, o, false);
      try {
        const double cf = interval_probability(mu, t, -R, R, probe.trunc_freq);
        worst = std::max(worst, std::abs(inner + (1.0 - cf) - 1.0));
      } catch (const Error& e) {
        // Far atoms make the transform almost periodic; the inversion quadrature
        // cannot resolve it at small t.
        if (!mu.atomic() || e.code() != ErrorCode::QuadratureFailure) throw;
        skipped += (skipped.empty() ? "" : ", ") + num(t);
      }
    }
    out.push_back(inv("mass_normalization", worst <= opts.mass_tol, worst, opts.mass_tol,
                      "|int pbar_t - 1| on [-20/rho_t, 20/rho_t] and |int_{-R}^{R} p_t + P(|Z_t| >= R) - 1|, R = 5/rho_t" +
                          (skipped.empty() ? std::string() : "; p_t tail not resolved at t = " + skipped)));
  }

  // I_k / rho_t^{k+1} bounded above and below over the t grid.
  if (want("ik")) {
    double worst = 0.0;
    bool finite = true;
    for (int k = 0; k <= 2; ++k) {
      const IkDiagnostic d = I_k_diagnostic(mu, tg, k, 1.0);
      if (!(d.inf_ratio > 0.0) || !std::isfinite(d.sup_ratio)) finite = false;
      worst = std::max(worst, d.sup_ratio / d.inf_ratio);
    }
    out.push_back(inv("I_k_bounded", finite && worst <= opts.ik_band, worst, opts.ik_band,
                      "max over k = 0, 1, 2 of sup/inf of I_k / rho_t^{k+1}"));
  }
  return out;
}

nlohmann::json invariants_to_json(const std::vector<InvariantResult>& r) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : r) {
    a.push_back({{"name", x.name},
                 {"pass", x.pass},
                 {"value", x.value},
                 {"tolerance", x.tolerance},
                 {"detail", x.detail}});
  }
  return a;
}

}  // namespace levykb
