#pragma once

// Declarative Levy measures and the primitive integrals the rest of the
// library needs: truncated moments, tail masses, the characteristic exponent
// and its split at a cutoff radius.

#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace levykb {

enum class MeasureKind { PowerLaw, DyadicAtoms, TabulatedDensity, OscillatingStable };

/// m(u) = c_alpha |u|^{-1-alpha}.
struct PowerLawParams {
  double alpha = 1.0;
  double c_alpha = 1.0;
};

/// Atoms of weight 2^{n gamma} at +-2^{-n upsilon}, n >= n_min. The small-atom
/// side (n -> +inf) is summed analytically; n_max only bounds enumerations and
/// the divergence certificate.
struct DyadicAtomsParams {
  double gamma = 1.0;
  double upsilon = 1.0;
  int n_min = -60;
  std::optional<int> n_max;
};

/// Piecewise power-law (log-log linear) density through the (u, m) knots.
struct TabulatedDensityParams {
  std::vector<double> u;
  std::vector<double> m;
  bool symmetric_extension = true;
  std::optional<double> tail_exponent;   // m ~ u^{-1-p} beyond u_max
  std::optional<double> origin_exponent; // m ~ u^{-1-p} below u_min
};

enum class Modulator { Default, Constant, LogSine };

struct OscillatingStableParams {
  double alpha_minus = 0.8;
  double alpha_plus = 1.6;
  Modulator modulator = Modulator::Default;
  double u_min = 1e-10;
  double u_max = 1e3;
  double points_per_decade = 100.0;
};

struct LevyMeasureSpec {
  MeasureKind kind = MeasureKind::PowerLaw;
  double drift_a = 0.0;
  bool symmetric = true;
  std::variant<PowerLawParams, DyadicAtomsParams, TabulatedDensityParams, OscillatingStableParams>
      params;
  std::string label;
};

struct Atom {
  double position;
  double weight;
};

struct ValidationReport {
  double lk_integral = 0.0;  // int (1 ^ u^2) mu(du)
  bool infinite_activity = false;
  std::string divergence_certificate;
  std::vector<double> mass_sequence;  // mu(|u| > eps_j) along the certificate
  bool symmetric_measure = false;
  bool symmetric_declared = false;
  bool symmetry_consistent = false;
  std::vector<std::string> notes;
};

class MeasureImpl;

/// Immutable, validated measure. Copies share the evaluated state.
class LevyMeasure {
 public:
  explicit LevyMeasure(const LevyMeasureSpec& spec);

  const LevyMeasureSpec& spec() const { return spec_; }
  MeasureKind kind() const { return spec_.kind; }
  double drift() const { return spec_.drift_a; }
  bool symmetric() const;
  bool atomic() const;
  std::string hash() const { return hash_; }

  /// int_{|u| <= eps} u^2 mu(du); strict uses |u| < eps.
  double second_moment_below(double eps, bool strict = false) const;
  /// mu(|u| > r); inclusive uses |u| >= r.
  double tail_mass(double r, bool inclusive = false) const;
  /// int_{lo < |u| <= hi} u mu(du).
  double first_moment_band(double lo, double hi) const;
  /// int_{|u|<1} u mu - int_{|u|<=r} u mu.
  double compensator_shift(double r) const;

  double re_psi(double xi) const;
  /// Includes the drift term a xi.
  double im_psi(double xi) const;
  std::complex<double> psi(double xi) const { return {re_psi(xi), im_psi(xi)}; }

  /// int_{|u| <= r} (1 - e^{i xi u} + i xi u) mu(du).
  std::complex<double> psi_small(double xi, double r) const;
  /// int_{|u| > r} e^{i xi u} mu(du).
  std::complex<double> lambda_hat(double xi, double r) const;

  /// Atoms with lo < |u| <= hi (atomic measures only), capped by index.
  std::vector<Atom> atoms_in(double lo, double hi) const;

  /// Inverse-CDF draw from mu restricted to lo < |u| <= hi, normalized.
  /// u1 picks the magnitude, u2 the sign.
  double sample_band(double lo, double hi, double u1, double u2) const;

  /// Density m(u) for density measures (u may be negative).
  double density(double u) const;

  const MeasureImpl& impl() const { return *impl_; }

 private:
  LevyMeasureSpec spec_;
  std::shared_ptr<const MeasureImpl> impl_;
  std::string hash_;
};

ValidationReport validate(const LevyMeasureSpec& spec);
double truncated_second_moment(const LevyMeasure& mu, double eps);
double tail_mass(const LevyMeasure& mu, double r);

struct OscillatingBuild {
  TabulatedDensityParams table;
  bool modulator_decays = true;  // v alpha'(v) -> 0
  double max_negative_derivative = 0.0;
  int clipped_points = 0;
  std::vector<std::string> notes;
};

/// Tabulated density with psi^L(xi) = theta^-(ln xi), theta^- built from the
/// modulated index alpha(v).
OscillatingBuild build_oscillating_density(double alpha_minus, double alpha_plus,
                                           Modulator modulator, double u_min = 1e-10,
                                           double u_max = 1e3, double points_per_decade = 100.0);

/// alpha(v) of a modulator, v in R (constant continuation for v < 0).
double modulator_alpha(Modulator mod, double alpha_minus, double alpha_plus, double v);

/// Normalizing constant making Re psi(xi) = |xi|^alpha for the power law.
double stable_constant(double alpha);

LevyMeasureSpec preset(const std::string& name, const nlohmann::json& params = {});
LevyMeasureSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const LevyMeasureSpec& spec);
/// Accepts a preset name, a JSON file path, or an inline JSON object.
LevyMeasureSpec resolve_spec(const std::string& source);

std::string to_string(MeasureKind kind);
std::string to_string(Modulator mod);

}  // namespace levykb
