// levykb command-line front end. Talks to the library through the C API only.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "levykb/levykb.h"

namespace {

using nlohmann::json;

json parse_json_arg(const std::string& s, const char* what) {
  try {
    return json::parse(s);
  } catch (const json::exception&) {
    throw CLI::ValidationError(what, "not valid JSON: " + s);
  }
}

// --tail-cdf 1.5 or --tail-cdf '{"alpha": 1.5, "b2": 2}'
json tail_arg(const std::string& s, const char* form) {
  json j = parse_json_arg(s, "tail");
  if (j.is_number()) j = json{{"alpha", j}};
  if (!j.is_object()) throw CLI::ValidationError("tail", "expects a number or a JSON object");
  j["form"] = form;
  return j;
}

// key=value, value parsed as JSON when possible.
void put_param(json& obj, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw CLI::ValidationError("param", "expects key=value, got " + kv);
  const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
  try {
    obj[key] = json::parse(val);
  } catch (const json::exception&) {
    obj[key] = val;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-time density estimates for one-dimensional Levy processes"};
  app.set_version_flag("--version", std::string(lkb_version()));
  app.require_subcommand(1);

  std::string config_path, spec = "cauchy", t_grid, xi_grid, tail_cdf, tail_density, out_dir, format = "json";
  std::string scheme;
  std::vector<std::string> spec_params, example_params, estimates;
  std::vector<int> ks;
  double t0 = 0.0, t = 0.0, half_width = 0.0, delta = 0.0;
  int x_points = 0;
  std::size_t mc_n = 0;
  std::uint64_t seed = 0;
  bool no_verify = false, no_conv = false;
  std::string example;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"validate", "Check the measure: Levy-Khintchine integral, infinite activity, symmetry"},
      {"exponents", "Exponent profile, beta_hat, growth floor, sandwich and growth checks"},
      {"scales", "rho_t, rho_t^U, rho_t^L table and comparability report"},
      {"density", "Fourier-inverted density and derivatives, with the convolution check"},
      {"bounds", "Fit the estimate constants and certify them on the grid"},
      {"mc", "Monte Carlo increments compared with the inverted CDF"},
      {"example", "Reproduce one of the worked examples: exa1, exa2a, exa2b, exa3"},
      {"invariants", "Run the invariant suite"}};

  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration; flags override it");
    sub->add_option("--spec", spec, "Preset name, JSON file or inline JSON");
    sub->add_option("--spec-param", spec_params, "Preset parameter key=value (repeatable)");
    sub->add_option("--t0", t0, "Time horizon");
    sub->add_option("--t-grid", t_grid, "Log-spaced grid a:b:n");
    sub->add_option("--t", t, "Single time (density, mc)");
    sub->add_option("--x-points", x_points, "Points per x grid");
    sub->add_option("--half-width", half_width, "x grid spans +-half_width/rho_t");
    sub->add_option("--xi-grid", xi_grid, "Log-spaced frequency magnitudes a:b:n");
    sub->add_option("--k", ks, "Derivative orders")->check(CLI::Range(0, 2));
    auto* tc = sub->add_option("--tail-cdf", tail_cdf, "Tail 1-G: alpha or JSON");
    sub->add_option("--tail-density", tail_density, "Tail density g: alpha or JSON")->excludes(tc);
    sub->add_option("--mc-n", mc_n, "Monte Carlo sample size");
    sub->add_option("--seed", seed, "Monte Carlo seed");
    sub->add_option("--delta", delta, "Small-jump cut");
    sub->add_option("--scheme", scheme, "gaussian | drop");
    sub->add_option("--estimates", estimates, "Subset of estimates for bounds");
    sub->add_flag("--no-verify", no_verify, "Skip the refinement re-check");
    sub->add_flag("--no-convolution-check", no_conv, "Skip the convolution check");
    sub->add_option("--out", out_dir, "Output directory for reports, CSV sidecars and the manifest");
    sub->add_option("--format", format, "Format on stdout")->check(CLI::IsMember({"json", "csv"}));
    if (std::string(name) == "example") {
      sub->add_option("name", example, "exa1 | exa2a | exa2b | exa3")->required();
      sub->add_option("--param", example_params, "Example parameter key=value (repeatable)");
    }
  }

  json cfg = json::object();
  try {
    app.parse(argc, argv);
    const CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw CLI::ValidationError("--config", "cannot open " + config_path);
      std::stringstream ss;
      ss << is.rdbuf();
      cfg = parse_json_arg(ss.str(), "--config");
      if (!cfg.is_object()) throw CLI::ValidationError("--config", "must hold a JSON object");
    }
    const auto given = [&](const char* opt) { return sub->count(opt) > 0; };
    if (given("--spec") || !cfg.contains("spec")) cfg["spec"] = spec;
    if (!spec_params.empty()) {
      json p = cfg.value("spec_params", json::object());
      for (const auto& kv : spec_params) put_param(p, kv);
      cfg["spec_params"] = p;
    }
    if (given("--t0")) cfg["t0"] = t0;
    if (given("--t-grid")) cfg["t_grid"] = t_grid;
    if (given("--t")) cfg["t"] = t;
    if (given("--x-points")) cfg["x_points"] = x_points;
    if (given("--half-width")) cfg["half_width"] = half_width;
    if (given("--xi-grid")) cfg["xi_grid"] = xi_grid;
    if (given("--k")) cfg["k"] = ks;
    if (given("--tail-cdf")) cfg["tail"] = tail_arg(tail_cdf, "cdf");
    if (given("--tail-density")) cfg["tail"] = tail_arg(tail_density, "density");
    if (given("--mc-n")) cfg["mc_n"] = mc_n;
    if (given("--seed")) cfg["seed"] = seed;
    if (given("--delta")) cfg["delta"] = delta;
    if (given("--scheme")) cfg["scheme"] = scheme;
    if (given("--estimates")) cfg["estimates"] = estimates;
    if (no_verify) cfg["verify"] = false;
    if (no_conv) cfg["convolution_check"] = false;
    if (given("--out")) cfg["out"] = out_dir;
    if (given("--format")) cfg["format"] = format;
    if (!example.empty()) cfg["example"] = example;
    if (!example_params.empty()) {
      json p = cfg.value("example_params", json::object());
      for (const auto& kv : example_params) put_param(p, kv);
      cfg["example_params"] = p;
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  lkb_report* rep = nullptr;
  const lkb_status st = lkb_run_command(command.c_str(), cfg.dump().c_str(), &rep);
  if (st != LKB_OK) {
    std::cerr << "levykb " << command << ": " << lkb_last_error() << "\n";
    return 1;
  }
  const std::string fmt = cfg.value("format", std::string("json"));
  const char* csv = lkb_report_csv(rep);
  if (fmt == "csv" && *csv) {
    std::cout << csv;
  } else {
    std::cout << lkb_report_json(rep) << "\n";
  }
  std::cerr << command << ": " << (lkb_report_verdict(rep) == LKB_PASS       ? "PASS"
                                   : lkb_report_verdict(rep) == LKB_MARGINAL ? "MARGINAL"
                                                                             : "FAIL")
            << "\n";
  const int rc = lkb_report_exit_code(rep);
  lkb_report_destroy(rep);
  return rc;
}
