// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "levykb/bounds.hpp"
#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/harness.hpp"
#include "levykb/montecarlo.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

using namespace levykb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

LevyMeasure stable(double alpha) { return LevyMeasure(preset("stable", {{"alpha", alpha}})); }
LevyMeasure dyadic(double gamma) { return LevyMeasure(preset("dyadic", {{"gamma", gamma}, {"upsilon", 1.0}})); }

FitGrid base_grid() {
  FitGrid g;
  g.t = numerics::logspace(1e-3, 1.0, 5);
  g.half_width = 50.0;
  g.x_points = 201;
  return g;
}

double refinement_change(const BoundCertificate& c) { return c.refinement ? c.refinement->max_change : INFINITY; }

// 1. Cauchy closed form.
Outcome c1() {
  const auto t0 = Clock::now();
  const LevyMeasure mu(preset("cauchy"));
  double worst = 0.0;
  for (double t : {0.01, 0.1, 1.0}) {
    const auto x = numerics::linspace(-20.0 * t, 20.0 * t, 401);
    const DensityGrid g = density(mu, t, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double exact = t / (std::numbers::pi * (t * t + x[i] * x[i]));
      worst = std::max(worst, std::abs(g.values[i] / exact - 1.0));
    }
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-6 && s <= 10.0, fmt("max rel err %.2e (tol 1e-6), %.2f s (limit 10)", worst, s)};
}

// 2. beta_hat = 2/alpha.
Outcome c2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double a : {0.5, 1.0, 1.5}) {
    const BetaEstimate b = estimate_beta(stable(a), default_beta_grid());
    worst = std::max(worst, std::abs(b.beta_hat * a / 2.0 - 1.0));
  }
  const double s = seconds_since(t0);
  return {worst <= 0.005 && s <= 5.0, fmt("max rel dev %.2e (tol 5e-3), %.2f s (limit 5)", worst, s)};
}

// 3. rho_t = t^{-1/alpha}.
Outcome c3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double a : {0.5, 1.0, 1.5}) {
    const LevyMeasure mu = stable(a);
    for (double t : numerics::logspace(1e-6, 1.0, 25)) worst = std::max(worst, std::abs(rho(mu, t) * std::pow(t, 1.0 / a) - 1.0));
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-8 && s <= 5.0, fmt("max rel err %.2e (tol 1e-8), %.2f s (limit 5)", worst, s)};
}

// 4. On-diagonal constancy.
Outcome c4() {
  std::string d;
  bool ok = true;
  const auto tg = numerics::logspace(1e-3, 1.0, 7);
  for (double a : {0.8, 1.0, 1.5}) {
    FitOptions o;
    o.verify = false;
    const BoundCertificate c = fit_on_diagonal(stable(a), tg, o);
    const double spread = c.constants.at("d") / c.constants.at("c") - 1.0;
    ok = ok && spread <= 1e-4;
    d += fmt("alpha %.1f spread %.1e; ", a, spread);
  }
  FitOptions o;
  o.verify = false;
  const BoundCertificate cc = fit_on_diagonal(LevyMeasure(preset("cauchy")), tg, o);
  const double dev = std::max(std::abs(cc.constants.at("c") - 1.0 / std::numbers::pi),
                              std::abs(cc.constants.at("d") - 1.0 / std::numbers::pi));
  ok = ok && dev <= 1e-6;
  return {ok, d + fmt("Cauchy |c - 1/pi| %.1e", dev)};
}

// 5. Convolution identity.
Outcome c5() {
  double worst = 0.0;
  for (const LevyMeasure& mu : {LevyMeasure(preset("cauchy")), dyadic(1.0)}) {
    for (double t : {std::exp2(-4.0), std::exp2(-8.0)}) {
      const double r = rho(mu, t);
      const auto x = numerics::linspace(-10.0 / r, 10.0 / r, 401);
      worst = std::max(worst, convolution_check(mu, t, x).relative);
    }
  }
  return {worst <= 1e-5, fmt("max deviation / max p_t %.2e (tol 1e-5)", worst)};
}

const std::vector<std::pair<const char*, std::function<LevyMeasure()>>>& three_specs() {
  static const std::vector<std::pair<const char*, std::function<LevyMeasure()>>> s = {
      {"cauchy", [] { return LevyMeasure(preset("cauchy")); }},
      {"stable1.5", [] { return stable(1.5); }},
      {"dyadic", [] { return dyadic(1.0); }}};
  return s;
}

// 6. Compound upper.
Outcome c6() {
  bool ok = true;
  std::string d;
  for (const auto& [name, make] : three_specs()) {
    const BoundCertificate c = fit_compound_upper(make(), base_grid());
    const double ch = refinement_change(c);
    ok = ok && c.verdict == Verdict::Pass && ch <= 0.05;
    d += std::string(name) + " " + to_string(c.verdict) + fmt(" b1 %.4g change %.1e; ", c.constants.at("b1"), ch);
  }
  return {ok, d};
}

// 7. Compound lower, with the dyadic atom table.
Outcome c7() {
  bool ok = true;
  std::string d;
  for (const auto& [name, make] : three_specs()) {
    const BoundCertificate c = fit_compound_lower(make(), base_grid());
    const double ch = refinement_change(c);
    ok = ok && c.verdict == Verdict::Pass && c.constants.at("b3") > 0.0 && ch <= 0.05;
    d += std::string(name) + " " + to_string(c.verdict) + fmt(" b3 %.4g change %.1e", c.constants.at("b3"), ch);
    if (std::string(name) == "dyadic") {
      const double ac = c.constants.count("atom_c") ? c.constants.at("atom_c") : 0.0;
      const std::size_t rows = c.details.contains("atom_table") ? c.details.at("atom_table").size() : 0;
      ok = ok && ac > 0.0 && rows > 0;
      d += fmt(" atom c %.4g over %.0f rows", ac, static_cast<double>(rows));
    }
    d += "; ";
  }
  return {ok, d};
}

// 8. Bell bounds.
Outcome c8() {
  bool ok = true;
  std::string d;
  const std::vector<std::pair<std::string, std::pair<LevyMeasure, TailSpec>>> cases = {
      {"cauchy/density", {LevyMeasure(preset("cauchy")), TailSpec::power(TailSpec::Form::Density, 1.0)}},
      {"dyadic1.5/cdf", {dyadic(1.5), TailSpec::power(TailSpec::Form::Cdf, 1.5)}}};
  for (const auto& [name, mt] : cases) {
    const BoundCertificate c = bell_upper(mt.first, base_grid(), mt.second);
    const double ch = refinement_change(c);
    const bool pre = c.details.contains("subexponential_checks");
    ok = ok && c.verdict == Verdict::Pass && ch <= 0.05 && c.min_margin >= 0.0 && pre;
    d += name + " " + to_string(c.verdict) +
         fmt(" C1 %.4g change %.1e min margin %.1e; ", c.constants.at("C1"), ch, c.min_margin);
  }
  return {ok, d};
}

// 9. Derivative bound and closed-form derivative.
Outcome c9() {
  const LevyMeasure mu(preset("cauchy"));
  const BoundCertificate c = fit_derivative_upper(mu, base_grid(), 1);
  double worst = 0.0;
  for (double t : {0.01, 0.1, 1.0}) {
    const auto x = numerics::linspace(-20.0 * t, 20.0 * t, 401);
    const DensityGrid g = density(mu, t, x, 1);
    std::vector<double> exact(x.size());
    double mx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      exact[i] = -2.0 * t * x[i] / (std::numbers::pi * std::pow(t * t + x[i] * x[i], 2));
      mx = std::max(mx, std::abs(exact[i]));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(exact[i]) > 1e-3 * mx) worst = std::max(worst, std::abs(g.values[i] / exact[i] - 1.0));
    }
  }
  return {c.verdict == Verdict::Pass && worst <= 1e-5,
          "certificate " + to_string(c.verdict) + fmt(", b1 %.4g, derivative max rel err %.2e (tol 1e-5)",
                                                      c.constants.at("b1"), worst)};
}

// 10. x ln(1+x) kernel margins below the exponential ones at matched width.
Outcome c10() {
  const LevyMeasure mu(preset("cauchy"));
  const FitGrid g = base_grid();
  const BoundCertificate el = fit_bar_upper(mu, g, KernelShape::ExpLog);
  const double w = el.constants.at("b2");
  const BoundCertificate ex = fit_bar_upper(mu, g, KernelShape::Exponential, w);
  if (el.margins.size() != ex.margins.size()) return {false, "margin tables differ in size"};
  std::size_t n = 0, bad = 0;
  for (std::size_t i = 0; i < el.margins.size(); ++i) {
    const MarginRow &a = el.margins[i], &b = ex.margins[i];
    if (a.t != b.t || a.x != b.x) return {false, "margin tables not aligned"};
    if (std::abs(a.x) / a.t < 5.0) continue;  // rho_t = 1/t
    ++n;
    if (a.margin > b.margin * (1.0 + 1e-12) + 1e-15) ++bad;
  }
  return {n > 0 && bad == 0 && el.verdict != Verdict::Fail,
          fmt("b2 %.4g, %.0f points with rho|x| >= 5, %.0f violations", w, static_cast<double>(n),
              static_cast<double>(bad))};
}

// 11. Monte Carlo KS.
Outcome c11() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string d;
  const std::vector<std::pair<const char*, std::pair<LevyMeasure, double>>> cases = {
      {"cauchy", {LevyMeasure(preset("cauchy")), 0.1}}, {"dyadic", {dyadic(1.0), std::exp2(-6.0)}}};
  for (const auto& [name, mt] : cases) {
    const auto& [mu, t] = mt;
    SamplerConfig sc;
    sc.n_samples = 200000;
    sc.seed = 12345;
    const SampleRun run = sample_increments(mu, t, sc);
    const SampleStats st = sample_stats(run.samples);
    const double r = rho(mu, t);
    const double reach = 1.25 * std::max(std::abs(st.q_lo), std::abs(st.q_hi));
    const auto np = static_cast<std::size_t>(std::min(2.0 * reach * r / 0.02 + 1.0, std::exp2(20.0)));
    const GofResult gof = compare_to_density(run.samples, density(mu, t, numerics::linspace(-reach, reach, np)));
    ok = ok && gof.ks_stat <= 0.01;
    d += std::string(name) + fmt(" KS %.2e; ", gof.ks_stat);
  }
  const double s = seconds_since(t0);
  return {ok && s <= 60.0, d + fmt("tol 1e-2, %.1f s (limit 60)", s)};
}

// 12. Example 3 construction.
Outcome c12() {
  double spread = 0.0;
  for (double a : {0.8, 1.2, 1.6}) {
    const OscillatingBuild b = build_oscillating_density(a, a, Modulator::Constant);
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 0; i < b.table.u.size(); ++i) {
      const double v = b.table.m[i] * std::pow(b.table.u[i], 1.0 + a);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    spread = std::max(spread, hi / lo - 1.0);
  }
  const LevyMeasure mu(preset("oscillating", {{"alpha_minus", 0.8}, {"alpha_plus", 1.6}}));
  const auto& op = std::get<OscillatingStableParams>(mu.spec().params);
  const double top = 1.0 / op.u_min;
  double track = 0.0;
  for (double xi : numerics::logspace(top / 100.0, top, 41)) {
    const double target = 2.0 / modulator_alpha(op.modulator, 0.8, 1.6, std::log(xi));
    track = std::max(track, std::abs(psi_U(mu, xi) / psi_L(mu, xi) / target - 1.0));
  }
  const double beta = estimate_beta(mu, default_beta_grid()).beta_hat;
  return {spread <= 0.01 && track <= 0.1 && beta <= 2.0 / 0.8 + 0.1,
          fmt("power-law spread %.1e (tol 1e-2), tracking %.3f (tol 0.1) on [%.0e, %.0e]", spread, track, top / 100.0, top) +
              fmt(", beta_hat %.4f <= %.2f", beta, 2.0 / 0.8 + 0.1)};
}

// 13. Invariant suite on the four presets.
Outcome c13() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string failed;
  for (const char* name : {"cauchy", "stable", "dyadic", "oscillating"}) {
    for (const auto& r : run_invariants(LevyMeasure(preset(name)))) {
      if (!r.pass) {
        ok = false;
        failed += std::string(name) + ":" + r.name + " ";
      }
    }
  }
  const double s = seconds_since(t0);
  return {ok && s <= 300.0, (failed.empty() ? std::string("all green") : "failed " + failed) +
                               fmt(", %.1f s (limit 300)", s)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"Cauchy closed form", c1},        {"stable beta identity", c2},    {"scale exactness", c3},
      {"on-diagonal constancy", c4},     {"convolution identity", c5},    {"compound upper", c6},
      {"compound lower", c7},            {"bell bounds", c8},             {"derivative bounds", c9},
      {"symmetric sharpening", c10},     {"Monte Carlo oracle", c11},     {"oscillating construction", c12},
      {"invariant suite", c13}};
  // Optional: run a subset, e.g. "levykb_acceptance 1 5 11".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-26s %s  %s [%.1f s]\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
