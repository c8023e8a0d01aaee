#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/harness.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

namespace levykb {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

DensityOptions density_opts(const RunConfig& c) {
  DensityOptions o;
  o.rel_trunc = c.rel_trunc;
  o.alias_tol = c.alias_tol;
  return o;
}

FitOptions fit_opts(const RunConfig& c) {
  FitOptions o;
  o.verify = c.verify;
  o.density = density_opts(c);
  return o;
}

FitGrid fit_grid(const RunConfig& c) {
  FitGrid g;
  g.t = effective_t_grid(c);
  g.half_width = c.half_width;
  g.x_points = c.x_points;
  return g;
}

Verdict all_pass(const std::vector<InvariantResult>& r) {
  for (const auto& x : r) {
    if (!x.pass) return Verdict::Fail;
  }
  return Verdict::Pass;
}

Verdict from_bool(bool ok) { return ok ? Verdict::Pass : Verdict::Fail; }

// Shared state of one command run.
struct Run {
  const RunConfig& cfg;
  CommandReport rep;
  nlohmann::json constants = nlohmann::json::object();

  void file(const std::string& name, const std::string& content, bool binary = false) {
    if (cfg.out_dir.empty()) return;
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    os << content;
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    rep.files.push_back(name);
  }
};

// ------------------------------------------------------------------ commands

void cmd_validate(Run& r, const LevyMeasure& mu) {
  const ValidationReport v = validate(mu.spec());
  r.rep.report["validation"] = {{"lk_integral", v.lk_integral},
                                {"infinite_activity", v.infinite_activity},
                                {"divergence_certificate", v.divergence_certificate},
                                {"mass_sequence", v.mass_sequence},
                                {"symmetric_measure", v.symmetric_measure},
                                {"symmetric_declared", v.symmetric_declared},
                                {"symmetry_consistent", v.symmetry_consistent},
                                {"notes", v.notes}};
  r.rep.verdict = from_bool(v.infinite_activity && v.symmetry_consistent && std::isfinite(v.lk_integral));
}

void cmd_exponents(Run& r, const LevyMeasure& mu) {
  const auto xi = r.cfg.xi_grid.empty() ? default_beta_grid() : r.cfg.xi_grid;
  const ExponentProfile p = exponent_profile(mu, xi);
  std::ostringstream csv;
  write_profile_csv(p, csv);
  r.rep.csv = csv.str();
  r.file("exponents.csv", r.rep.csv);
  InvariantOptions io;
  io.xi_grid = xi;
  io.groups = {"exponents"};
  const auto inv = run_invariants(mu, io);
  r.constants["beta_hat"] = p.beta.beta_hat;
  r.constants["c_floor"] = p.c_floor;
  r.rep.report["beta"] = {{"beta_hat", p.beta.beta_hat},
                          {"argmax_xi", p.beta.argmax_xi},
                          {"xi_range", {p.beta.xi_lo, p.beta.xi_hi}},
                          {"extensions", {p.beta.extensions_low, p.beta.extensions_high}},
                          {"caveat", p.beta.caveat}};
  r.rep.report["c_floor"] = p.c_floor;
  r.rep.report["points"] = p.xi.size();
  r.rep.report["checks"] = invariants_to_json(inv);
  r.rep.verdict = all_pass(inv);
}

void cmd_scales(Run& r, const LevyMeasure& mu) {
  const auto tg = effective_t_grid(r.cfg);
  const ScaleTable st = scale_table(mu, tg);
  std::ostringstream csv;
  write_scale_csv(st, csv);
  r.rep.csv = csv.str();
  r.file("scales.csv", r.rep.csv);
  const ComparabilityReport comp = comparability_report(mu, tg, {0.5, 2.0});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : comp.rows) {
    rows.push_back({{"pair", row.pair}, {"c", row.c}, {"min_ratio", row.min_ratio}, {"max_ratio", row.max_ratio}});
  }
  InvariantOptions io;
  io.t_grid = tg;
  io.groups = {"scales"};
  const auto inv = run_invariants(mu, io);
  r.rep.report["table"] = {{"t", st.t}, {"rho", st.rho}, {"rho_U", st.rho_U}, {"rho_L", st.rho_L}};
  r.rep.report["comparability"] = {{"rows", rows}, {"pass", comp.pass}};
  r.rep.report["checks"] = invariants_to_json(inv);
  r.rep.verdict = combine(from_bool(comp.pass), all_pass(inv));
}

void cmd_density(Run& r, const LevyMeasure& mu) {
  const std::vector<double> ts = r.cfg.t ? std::vector<double>{*r.cfg.t} : effective_t_grid(r.cfg);
  const DensityOptions o = density_opts(r.cfg);
  std::ostringstream csv;
  csv.precision(17);
  csv << "t,k,x,value\n";
  nlohmann::json grids = nlohmann::json::array();
  Verdict v = Verdict::Pass;
  double worst_conv = 0.0;
  for (double t : ts) {
    const double rho_t = rho(mu, t);
    const auto x = numerics::linspace(-r.cfg.half_width / rho_t, r.cfg.half_width / rho_t,
                                      static_cast<std::size_t>(r.cfg.x_points));
    DensityOptions ot = o;
    ot.rho_t = rho_t;
    for (int k : r.cfg.k) {
      const DensityGrid g = density(mu, t, x, k, ot);
      for (std::size_t i = 0; i < x.size(); ++i) csv << t << ',' << k << ',' << x[i] << ',' << g.values[i] << '\n';
      grids.push_back({{"t", t},
                       {"k", k},
                       {"rho_t", g.rho_t},
                       {"trunc_freq", g.trunc_freq},
                       {"tail_bound", g.tail_bound},
                       {"alias_bound", g.alias_bound},
                       {"period", g.period},
                       {"fft_size", g.fft_size},
                       {"dropped_mass", g.dropped_mass},
                       {"imag_residue", g.imag_residue},
                       {"x", g.x},
                       {"values", g.values}});
    }
    if (r.cfg.convolution_check) {
      const ConvolutionCheck cc = convolution_check(mu, t, x, -1, ot);
      worst_conv = std::max(worst_conv, cc.relative);
      grids.back()["convolution_check"] = {{"max_deviation", cc.max_deviation},
                                           {"relative", cc.relative},
                                           {"m_max", cc.m_max},
                                           {"poisson_tail", cc.poisson_tail},
                                           {"dropped_mass", cc.dropped_mass}};
      if (!(cc.relative <= 1e-5)) v = Verdict::Fail;
    }
  }
  r.rep.csv = csv.str();
  r.file("density.csv", r.rep.csv);
  r.rep.report["grids"] = grids;
  if (r.cfg.convolution_check) {
    r.rep.report["convolution_check"] = {{"worst_relative", worst_conv}, {"tolerance", 1e-5}};
  }
  r.rep.verdict = v;
}

std::vector<std::string> default_estimates(const RunConfig& c, const LevyMeasure& mu) {
  std::vector<std::string> e = {"on_diag", "compound_upper", "compound_lower", "deriv_upper_1", "deriv_upper_2"};
  if (mu.symmetric()) {
    e.push_back("bar_exp");
    e.push_back("bar_explog");
  }
  if (c.tail) e.push_back("bell");
  e.push_back("I_k");
  return e;
}

nlohmann::json ik_json(const IkDiagnostic& d) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : d.rows) rows.push_back({{"t", r.t}, {"rho", r.rho}, {"value", r.value}, {"ratio", r.ratio}});
  return {{"k", d.k}, {"lambda", d.lambda}, {"sup_ratio", d.sup_ratio}, {"inf_ratio", d.inf_ratio}, {"rows", rows}};
}

void cmd_bounds(Run& r, const LevyMeasure& mu) {
  const auto est = r.cfg.estimates.empty() ? default_estimates(r.cfg, mu) : r.cfg.estimates;
  const FitGrid grid = fit_grid(r.cfg);
  const FitOptions fo = fit_opts(r.cfg);
  nlohmann::json certs = nlohmann::json::object();
  Verdict v = Verdict::Pass;
  for (const std::string& name : est) {
    try {
      if (name == "I_k") {
        nlohmann::json ik = nlohmann::json::array();
        for (int k = 0; k <= 2; ++k) {
          const IkDiagnostic d = I_k_diagnostic(mu, grid.t, k, 1.0);
          ik.push_back(ik_json(d));
          r.constants["I_k." + std::to_string(k) + ".sup_over_inf"] = d.sup_ratio / d.inf_ratio;
        }
        certs[name] = {{"diagnostic", ik}};
        continue;
      }
      BoundCertificate c;
      if (name == "on_diag") {
        c = fit_on_diagonal(mu, grid.t, fo);
      } else if (name == "compound_upper") {
        c = fit_compound_upper(mu, grid, fo);
      } else if (name == "compound_lower") {
        c = fit_compound_lower(mu, grid, fo);
      } else if (name == "deriv_upper_1" || name == "deriv_upper_2") {
        c = fit_derivative_upper(mu, grid, name.back() - '0', fo);
      } else if (name == "bar_exp") {
        c = fit_bar_upper(mu, grid, KernelShape::Exponential, std::nullopt, fo);
      } else if (name == "bar_explog") {
        c = fit_bar_upper(mu, grid, KernelShape::ExpLog, std::nullopt, fo);
      } else if (name == "bell") {
        if (!r.cfg.tail) throw Error(ErrorCode::InvalidParameters, "bell needs a tail specification");
        c = bell_upper(mu, grid, *r.cfg.tail, fo);
      } else {
        throw Error(ErrorCode::InvalidParameters, "unknown estimate '" + name + "'");
      }
      certs[name] = certificate_to_json(c);
      for (const auto& [k, val] : c.constants) r.constants[name + "." + k] = val;
      v = combine(v, c.verdict);
      if (!r.cfg.out_dir.empty()) {
        std::ostringstream csv;
        write_margins_csv(c, csv);
        r.file("margins_" + name + ".csv", csv.str());
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidParameters) throw;
      certs[name] = {{"verdict", "FAIL"}, {"error", to_string(e.code())}, {"message", e.what()}};
      v = Verdict::Fail;
    }
  }
  r.rep.report["estimates"] = certs;
  r.rep.verdict = v;
}

// Uniform grid over the central sample range, 0.02 / rho_t spacing, at most 2^20 points.
std::vector<double> mc_grid(const std::vector<double>& samples, double rho_t) {
  const SampleStats s = sample_stats(samples);
  const double reach = 1.25 * std::max(std::abs(s.q_lo), std::abs(s.q_hi));
  const double h = 0.02 / rho_t;
  const auto n = static_cast<std::size_t>(std::min(std::ceil(2.0 * reach / h) + 1.0, std::exp2(20.0)));
  return numerics::linspace(-reach, reach, std::max<std::size_t>(n, 3));
}

void cmd_mc(Run& r, const LevyMeasure& mu) {
  const double t = r.cfg.t.value_or(std::min(0.1, r.cfg.t0));
  SamplerConfig sc;
  sc.n_samples = r.cfg.mc_n;
  sc.seed = r.cfg.seed;
  sc.delta = r.cfg.delta;
  sc.scheme = r.cfg.scheme;
  const SampleRun run = sample_increments(mu, t, sc);
  const double rho_t = rho(mu, t);
  DensityOptions o = density_opts(r.cfg);
  o.rho_t = rho_t;
  const DensityGrid g = density(mu, t, mc_grid(run.samples, rho_t), 0, o);
  const GofResult gof = compare_to_density(run.samples, g);
  const SampleStats st = sample_stats(run.samples);
  r.rep.report["run"] = run_to_json(run);
  r.rep.report["stats"] = {{"mean", st.mean},     {"stddev", st.stddev}, {"median", st.median},
                           {"q_0.0005", st.q_lo}, {"q_0.9995", st.q_hi}};
  r.rep.report["gof"] = gof_to_json(gof);
  r.rep.report["grid_points"] = g.x.size();
  // Sensitivity to the small-jump treatment; reported, not judged.
  SamplerConfig other = sc;
  other.scheme = sc.scheme == SamplerScheme::GaussianApprox ? SamplerScheme::DropSmall : SamplerScheme::GaussianApprox;
  try {
    const SampleRun alt = sample_increments(mu, t, other);
    r.rep.report["scheme_ks"] = {{"scheme", to_string(other.scheme)}, {"ks", ks_two_sample(run.samples, alt.samples)}};
  } catch (const Error& e) {
    r.rep.report["scheme_ks"] = {{"scheme", to_string(other.scheme)}, {"error", e.what()}};
  }
  r.constants["ks_stat"] = gof.ks_stat;
  r.constants["delta"] = run.delta;
  if (!r.cfg.out_dir.empty()) {
    std::ostringstream bin(std::ios::binary);
    write_samples(run, bin);
    r.file("samples.bin", bin.str(), true);
  }
  std::ostringstream csv;
  csv << "n,ks_stat,cvm_stat,threshold,missing_mass,pass\n"
      << gof.n << ',' << gof.ks_stat << ',' << gof.cvm_stat << ',' << gof.threshold << ',' << gof.missing_mass
      << ',' << (gof.pass ? 1 : 0) << '\n';
  r.rep.csv = csv.str();
  r.rep.verdict = from_bool(gof.pass);
}

// ------------------------------------------------------------------ examples

double param(const RunConfig& c, const char* key, double fallback) {
  return c.example_params.contains(key) ? c.example_params.at(key).get<double>() : fallback;
}

// p_t(x) against rho_t f(rho_t x), f(y) = 1 ^ |y|^{-1-alpha}.
void exa1(Run& r) {
  const double alpha = param(r.cfg, "alpha", 1.0);
  const LevyMeasure mu(preset("stable", {{"alpha", alpha}}));
  const DensityOptions o = density_opts(r.cfg);
  double k1 = std::numeric_limits<double>::infinity(), k2 = 0.0;
  std::ostringstream csv;
  csv << "t,x,density,ratio\n";
  for (double t : effective_t_grid(r.cfg)) {
    const double rho_t = rho(mu, t);
    const auto x = numerics::linspace(-r.cfg.half_width / rho_t, r.cfg.half_width / rho_t,
                                      static_cast<std::size_t>(r.cfg.x_points));
    DensityOptions ot = o;
    ot.rho_t = rho_t;
    const DensityGrid g = density(mu, t, x, 0, ot);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = std::abs(rho_t * x[i]);
      const double f = y <= 1.0 ? 1.0 : std::pow(y, -1.0 - alpha);
      const double q = g.values[i] / (rho_t * f);
      k1 = std::min(k1, q);
      k2 = std::max(k2, q);
      csv << t << ',' << x[i] << ',' << g.values[i] << ',' << q << '\n';
    }
  }
  r.rep.csv = csv.str();
  r.file("exa1.csv", r.rep.csv);
  r.constants["k1"] = k1;
  r.constants["k2"] = k2;
  const double band = k2 / k1;
  r.rep.report["headline"] = "k1 rho_t f(rho_t x) <= p_t(x) <= k2 rho_t f(rho_t x), f(y) = 1 ^ |y|^{-1-alpha}, rho_t = t^{-1/alpha}";
  r.rep.report["alpha"] = alpha;
  r.rep.report["band_ratio"] = band;
  r.rep.verdict = from_bool(k1 > 0.0 && band < 10.0);
}

LevyMeasure dyadic(const RunConfig& c, double gamma_default) {
  return LevyMeasure(preset("dyadic", {{"gamma", param(c, "gamma", gamma_default)}, {"upsilon", param(c, "upsilon", 1.0)}}));
}

void exa2a(Run& r) {
  const LevyMeasure mu = dyadic(r.cfg, 1.0);
  const BoundCertificate c = fit_compound_lower(mu, fit_grid(r.cfg), fit_opts(r.cfg));
  for (const auto& [k, v] : c.constants) r.constants[k] = v;
  const double atom_c = c.constants.count("atom_c") ? c.constants.at("atom_c") : 0.0;
  r.rep.report["headline"] = "p_t(2^{-n upsilon}) >= c t rho_t 2^{n gamma} for n <= n_0(t)";
  r.rep.report["atom_c"] = atom_c;
  r.rep.report["certificate"] = certificate_to_json(c);
  std::ostringstream csv;
  csv << "t,n,x,density,ratio\n";
  if (c.details.contains("atom_table")) {
    for (const auto& row : c.details.at("atom_table")) {
      csv << row.at("t").get<double>() << ',' << row.at("n").get<int>() << ',' << row.at("x").get<double>() << ','
          << row.at("density").get<double>() << ',' << row.at("ratio").get<double>() << '\n';
    }
  }
  r.rep.csv = csv.str();
  r.file("exa2a.csv", r.rep.csv);
  r.rep.verdict = combine(c.verdict, from_bool(atom_c > 0.0));
}

void exa2b(Run& r) {
  const LevyMeasure mu = dyadic(r.cfg, 1.5);
  const auto& d = std::get<DyadicAtomsParams>(mu.spec().params);
  const TailSpec tail = r.cfg.tail ? *r.cfg.tail : TailSpec::power(TailSpec::Form::Cdf, d.gamma / d.upsilon);
  const BoundCertificate c = bell_upper(mu, fit_grid(r.cfg), tail, fit_opts(r.cfg));
  for (const auto& [k, v] : c.constants) r.constants[k] = v;
  r.rep.report["headline"] = "bell envelope for p_t built from the sub-exponential tail 1 - G(v) = v^{-gamma/upsilon}, constant C_1 fitted";
  r.rep.report["certificate"] = certificate_to_json(c);
  std::ostringstream csv;
  write_margins_csv(c, csv);
  r.rep.csv = csv.str();
  r.file("exa2b.csv", r.rep.csv);
  r.rep.verdict = c.verdict;
}

void exa3(Run& r) {
  const double am = param(r.cfg, "alpha_minus", 0.8), ap = param(r.cfg, "alpha_plus", 1.6);
  const double ac = param(r.cfg, "alpha_constant", 0.5 * (am + ap));
  // Constant index: m(u) u^{1+alpha} must not move.
  const OscillatingBuild cb = build_oscillating_density(ac, ac, Modulator::Constant);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < cb.table.u.size(); ++i) {
    const double v = cb.table.m[i] * std::pow(cb.table.u[i], 1.0 + ac);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double spread = hi / lo - 1.0;

  nlohmann::json sp = {{"alpha_minus", am}, {"alpha_plus", ap}};
  if (r.cfg.example_params.contains("modulator")) sp["modulator"] = r.cfg.example_params.at("modulator");
  const LevyMeasure mu(preset("oscillating", sp));
  const auto& op = std::get<OscillatingStableParams>(mu.spec().params);
  const double xi_top = 1.0 / op.u_min;
  std::ostringstream csv;
  csv << "xi,psi_U_over_psi_L,two_over_alpha\n";
  double track = 0.0;
  for (double xi : numerics::logspace(xi_top / 100.0, xi_top, 41)) {
    const double ratio = psi_U(mu, xi) / psi_L(mu, xi);
    const double target = 2.0 / modulator_alpha(op.modulator, am, ap, std::log(xi));
    track = std::max(track, std::abs(ratio / target - 1.0));
    csv << xi << ',' << ratio << ',' << target << '\n';
  }
  const BetaEstimate be = estimate_beta(mu, default_beta_grid());
  r.rep.csv = csv.str();
  r.file("exa3.csv", r.rep.csv);
  r.constants["beta_hat"] = be.beta_hat;
  r.constants["constant_alpha_spread"] = spread;
  r.constants["tracking_deviation"] = track;
  r.rep.report["headline"] = "psi^U / psi^L ~ 2 / alpha(ln xi); condition A with beta_hat <= 2/alpha_- + 0.1";
  r.rep.report["constant_alpha"] = {{"alpha", ac}, {"spread", spread}, {"tolerance", 0.01}};
  r.rep.report["tracking"] = {{"xi_range", {xi_top / 100.0, xi_top}}, {"max_deviation", track}, {"tolerance", 0.1}};
  r.rep.report["beta"] = {{"beta_hat", be.beta_hat}, {"bound", 2.0 / am + 0.1}};
  r.rep.report["construction_notes"] = cb.notes;
  r.rep.verdict = from_bool(spread <= 0.01 && track <= 0.1 && be.beta_hat <= 2.0 / am + 0.1);
}

void cmd_example(Run& r) {
  const std::string& e = r.cfg.example;
  if (e == "exa1") {
    exa1(r);
  } else if (e == "exa2a") {
    exa2a(r);
  } else if (e == "exa2b") {
    exa2b(r);
  } else if (e == "exa3") {
    exa3(r);
  } else {
    throw Error(ErrorCode::InvalidParameters, "example must be exa1, exa2a, exa2b or exa3");
  }
  r.rep.report["example"] = e;
}

void cmd_invariants(Run& r, const LevyMeasure& mu) {
  InvariantOptions io;
  io.xi_grid = r.cfg.xi_grid;
  if (!r.cfg.t_grid.empty()) io.t_grid = r.cfg.t_grid;
  const auto inv = run_invariants(mu, io);
  std::ostringstream csv;
  csv << "name,pass,value,tolerance\n";
  for (const auto& x : inv) csv << x.name << ',' << (x.pass ? 1 : 0) << ',' << x.value << ',' << x.tolerance << '\n';
  r.rep.csv = csv.str();
  r.rep.report["invariants"] = invariants_to_json(inv);
  r.rep.verdict = all_pass(inv);
}

}  // namespace

CommandReport run_command(const std::string& command, const RunConfig& cfg) {
  static const std::vector<std::string> known = {"validate", "exponents", "scales", "density",
                                                 "bounds",   "mc",        "example", "invariants"};
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    throw Error(ErrorCode::InvalidParameters, "unknown command '" + command + "'");
  }
  check_config(cfg);
  Run r{cfg, {}, nlohmann::json::object()};
  r.rep.command = command;
  const nlohmann::json cj = config_to_json(cfg);
  const std::string config_hash = hex64(numerics::fnv1a(command + cj.dump()));

  if (command == "example") {
    cmd_example(r);
  } else {
    const LevyMeasure mu = config_measure(cfg);
    r.rep.report["spec"] = spec_to_json(mu.spec());
    r.rep.report["spec_hash"] = mu.hash();
    if (command == "validate") cmd_validate(r, mu);
    if (command == "exponents") cmd_exponents(r, mu);
    if (command == "scales") cmd_scales(r, mu);
    if (command == "density") cmd_density(r, mu);
    if (command == "bounds") cmd_bounds(r, mu);
    if (command == "mc") cmd_mc(r, mu);
    if (command == "invariants") cmd_invariants(r, mu);
  }

  r.rep.report["command"] = command;
  r.rep.report["config"] = cj;
  r.rep.report["verdict"] = to_string(r.rep.verdict);
  r.rep.report["constants"] = r.constants;
  if (!cfg.out_dir.empty()) {
    r.file(command + ".json", r.rep.report.dump(2) + "\n");
    nlohmann::json versions;
    for (const char* m : {"levy_measures", "exponents", "scales", "decomposition", "fourier_density", "bounds",
                          "montecarlo_oracle", "harness_cli"}) {
      versions[m] = kVersion;
    }
    nlohmann::json manifest = {{"command", command},     {"config_hash", config_hash},
                               {"versions", versions},   {"constants", r.constants},
                               {"verdict", to_string(r.rep.verdict)}, {"files", r.rep.files}};
    r.file("manifest.json", manifest.dump(2) + "\n");
  }
  r.rep.report["manifest"] = {{"config_hash", config_hash}, {"version", kVersion}, {"files", r.rep.files}};
  return r.rep;
}

}  // namespace levykb
