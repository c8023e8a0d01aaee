#pragma once

// Compound kernel estimates, bell-type bounds and the I_k diagnostic, with
// grid-sup fitting of the constants and refinement checks.

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "levykb/decomposition.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/measure.hpp"

namespace levykb {

/// Unit-scale shapes: e^{-w|y|}, 1_{|y| <= w}, e^{-w|y| ln(1+|y|)}.
enum class KernelShape { Exponential, Indicator, ExpLog };

double kernel_shape(KernelShape shape, double width, double y);
std::string to_string(KernelShape shape);

struct CompoundKernelParams {
  KernelShape shape = KernelShape::Exponential;
  double scale = 1.0;  // b1 or b3
  double width = 1.0;  // b2 or b4
  int k = 0;           // sigma_t = rho_t^{k+1}, zeta_t = rho_t
  int m_max = -1;      // -1: series tail <= 1e-10 of the m = 0 term
};

/// sum_{m <= m_max} (1/m!) int sigma_t h((x - y) rho_t) Lambda_t^{*m}(dy) for one
/// decomposition. Atomic Lambda_t is convolved exactly; otherwise the powers
/// live on a cell grid of step dx (point masses at cell centres).
class CompoundEvaluator {
 public:
  CompoundEvaluator(const Decomposition& dec, double half_width, int m_max = -1, double dx = 0.0);

  double operator()(const CompoundKernelParams& p, double x) const;
  /// Sorted x.
  std::vector<double> operator()(const CompoundKernelParams& p, const std::vector<double>& x) const;
  /// Jump points of the indicator kernel sum inside [lo, hi].
  std::vector<double> edges(double width, double lo, double hi) const;

  double rho() const { return rho_; }
  int m_max() const { return m_max_; }
  double series_tail() const { return series_tail_; }
  double dropped_mass() const { return dropped_; }
  std::size_t support_size() const { return pos_.size(); }

 private:
  double rho_ = 0.0;
  int m_max_ = 0;
  double series_tail_ = 0.0;
  double dropped_ = 0.0;
  std::vector<double> pos_;     // sorted
  std::vector<double> weight_;  // includes e^{Lambda_t}
  std::vector<double> prefix_;  // prefix sums of weight_
};

double compound_eval(const CompoundKernelParams& p, const Decomposition& dec, double x);

enum class Verdict { Pass, Marginal, Fail };
std::string to_string(Verdict v);
/// Worst of the two.
Verdict combine(Verdict a, Verdict b);

enum class EstimateId { OnDiag, CompoundUpper, CompoundLower, DerivUpper, BarUpper, BellSubexpCDF,
                        BellSubexpDensity };
std::string to_string(EstimateId id);

/// t values and an x grid in units of 1/rho_t: x = s / rho_t, s in [-half_width, half_width].
struct FitGrid {
  std::vector<double> t;
  double half_width = 50.0;
  int x_points = 4001;
};

/// Geometric midpoints between consecutive t, and 2n - 1 x points.
FitGrid refine(const FitGrid& g);

struct MarginRow {
  double t;
  double x;
  double density;
  double bound;
  double margin;  // signed, divided by sigma_t; >= 0 is good
};

struct Refinement {
  std::size_t points = 0;
  std::size_t flips = 0;
  double flip_fraction = 0.0;
  std::map<std::string, double> constants;  // refit on the finer grid
  double max_change = 0.0;                  // relative, over fitted constants
};

struct BoundCertificate {
  EstimateId id = EstimateId::CompoundUpper;
  int k = 0;
  std::string spec_hash;
  FitGrid grid;
  std::map<std::string, double> constants;
  std::size_t points = 0;
  std::size_t unresolved = 0;  // density below the resolution floor, not fitted
  double min_margin = 0.0;
  std::vector<MarginRow> margins;
  Verdict verdict = Verdict::Fail;
  std::vector<std::string> caveats;
  std::optional<Refinement> refinement;
  nlohmann::json details;  // per-estimate tables
};

nlohmann::json certificate_to_json(const BoundCertificate& c, bool with_margins = false);
void write_margins_csv(const BoundCertificate& c, std::ostream& os);

struct FitOptions {
  std::vector<double> b2_grid;  // empty: 2^-6 .. 2^4 in half octaves
  std::vector<double> b4_grid;  // empty: 2^-4 .. 2^2 in half octaves
  double penalty = 1e-3;        // objective b1 (1 + penalty b2^{-1/2})
  double lower_window = 10.0;   // lower bounds on |x| <= lower_window / rho_t
  double resolve_floor = 1e-9;  // |density| below this times the slice max is unresolved
  double margin_slack = 1e-12;
  double flip_fraction_fail = 0.01;
  bool verify = true;  // re-check on refine(grid)
  bool keep_margins = true;
  DensityOptions density;
};

/// c = min_t max_x p_t / rho_t and d = max_t of the same.
BoundCertificate fit_on_diagonal(const LevyMeasure& mu, const std::vector<double>& t_grid,
                                 const FitOptions& opts = {});
BoundCertificate fit_compound_upper(const LevyMeasure& mu, const FitGrid& grid, const FitOptions& opts = {});
BoundCertificate fit_compound_lower(const LevyMeasure& mu, const FitGrid& grid, const FitOptions& opts = {});
BoundCertificate fit_derivative_upper(const LevyMeasure& mu, const FitGrid& grid, int k,
                                      const FitOptions& opts = {});
/// pbar_t(x) <= b1 rho_t h(rho_t x) with the exponential or the x ln(1+x) shape.
/// A fixed width skips the b2 search.
BoundCertificate fit_bar_upper(const LevyMeasure& mu, const FitGrid& grid, KernelShape shape,
                               std::optional<double> width = std::nullopt, const FitOptions& opts = {});

/// Sub-exponential tail, either 1 - G(v) (Cdf) or g(v) (Density), on v >= 1.
struct TailSpec {
  enum class Form { Cdf, Density };
  Form form = Form::Cdf;
  std::string family = "power";  // power | dirac
  double alpha = 1.0;
  double scale = 1.0;
  double b2 = 1.0;  // f_upper(y) = e^{-b2 |y|}
  std::function<double(double)> fn;

  static TailSpec power(Form form, double alpha, double scale = 1.0);
  static TailSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

BoundCertificate bell_upper(const LevyMeasure& mu, const FitGrid& grid, const TailSpec& tail,
                            const FitOptions& opts = {});

struct IkRow {
  double t;
  double rho;
  double value;
  double ratio;  // value / rho^{k+1}
};

struct IkDiagnostic {
  int k = 0;
  double lambda = 1.0;
  std::vector<IkRow> rows;
  double sup_ratio = 0.0;
  double inf_ratio = 0.0;
};

/// int |y|^k exp(-lambda t psi^U(y)) dy.
double I_k(const LevyMeasure& mu, double t, int k, double lambda);
IkDiagnostic I_k_diagnostic(const LevyMeasure& mu, const std::vector<double>& t_grid, int k, double lambda);

}  // namespace levykb
