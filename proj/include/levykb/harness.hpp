#pragma once

// Command layer shared by the CLI and the C API: run configuration, the
// validate / exponents / scales / density / bounds / mc / example / invariants
// commands, and the invariant suite.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "levykb/bounds.hpp"
#include "levykb/montecarlo.hpp"

namespace levykb {

struct RunConfig {
  nlohmann::json spec = "cauchy";  // preset name, JSON path, inline JSON text or a spec object
  nlohmann::json spec_params = nlohmann::json::object();  // preset parameters
  double t0 = 1.0;
  std::vector<double> t_grid;   // empty: 25 log-spaced points on [1e-4, t0]
  std::optional<double> t;      // single time for density and mc
  int x_points = 4001;
  double half_width = 50.0;     // x in [-half_width/rho_t, half_width/rho_t]
  std::vector<double> xi_grid;  // magnitudes; empty: default beta grid
  std::vector<int> k = {0};
  std::optional<TailSpec> tail;
  std::size_t mc_n = 200000;
  std::uint64_t seed = 20240607;
  std::optional<double> delta;
  SamplerScheme scheme = SamplerScheme::GaussianApprox;
  std::string out_dir;          // empty: no files
  std::string format = "json";  // json | csv
  double rel_trunc = 1e-10;
  double alias_tol = 1e-10;
  bool verify = true;
  bool convolution_check = true;
  std::vector<std::string> estimates;  // bounds subset; empty: all applicable
  std::string example;                 // exa1 | exa2a | exa2b | exa3
  nlohmann::json example_params = nlohmann::json::object();
};

/// "a:b:n", n log-spaced points on [a, b] (a single number is a one-point grid).
std::vector<double> parse_log_grid(const std::string& s);

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
/// Checks grids and t0; throws InvalidParameters.
void check_config(const RunConfig& c);
/// Effective t grid (defaults applied).
std::vector<double> effective_t_grid(const RunConfig& c);
LevyMeasure config_measure(const RunConfig& c);

struct CommandReport {
  std::string command;
  Verdict verdict = Verdict::Fail;
  nlohmann::json report;            // JSON primary output
  std::string csv;                  // main CSV sidecar, if any
  std::vector<std::string> files;   // written under out_dir
};

/// 0 for PASS, 2 for MARGINAL, 1 for FAIL.
int exit_code(Verdict v);

/// Runs one command. Module errors propagate as levykb::Error.
CommandReport run_command(const std::string& command, const RunConfig& cfg);

struct InvariantResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // worst observed statistic
  double tolerance = 0.0;
  std::string detail;
};

struct InvariantOptions {
  std::vector<double> xi_grid;  // empty: default beta grid
  std::vector<double> t_grid;   // empty: 7 log-spaced points on [1e-4, 1]
  double integral_rel_tol = 1e-6;
  double mass_tol = 1e-8;
  double ik_band = 10.0;  // sup/inf of I_k / rho_t^{k+1} over the t grid
  /// Subset of exponents, scales, decomposition, density, ik; empty runs all.
  std::vector<std::string> groups;
};

/// Sandwich, doubling growth, integral relation, mass normalization,
/// evenness/oddness, I_k boundedness, plus the scale and decomposition checks.
std::vector<InvariantResult> run_invariants(const LevyMeasure& mu, const InvariantOptions& opts = {});
nlohmann::json invariants_to_json(const std::vector<InvariantResult>& r);

}  // namespace levykb
