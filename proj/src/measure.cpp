#include "levykb/measure.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "levykb/error.hpp"
#include "levykb/numerics.hpp"
#include "measure_impl.hpp"

namespace levykb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidParameters, what);
}

void check_params(const LevyMeasureSpec& spec) {
  require(std::isfinite(spec.drift_a), "drift_a must be finite");
  switch (spec.kind) {
    case MeasureKind::PowerLaw: {
      const auto& p = std::get<PowerLawParams>(spec.params);
      require(p.alpha > 0.0 && p.alpha < 2.0, "alpha must lie in (0, 2)");
      require(p.c_alpha > 0.0 && std::isfinite(p.c_alpha), "C_alpha must be positive");
      require(spec.symmetric, "power-law measures are symmetric; symmetric flag disagrees");
      break;
    }
    case MeasureKind::DyadicAtoms: {
      const auto& p = std::get<DyadicAtomsParams>(spec.params);
      require(p.gamma > 0.0 && p.upsilon > 0.0, "gamma and upsilon must be positive");
      require(p.gamma < 2.0 * p.upsilon, "need gamma < 2 upsilon");
      require(!p.n_max || *p.n_max >= p.n_min, "need n_min <= n_max");
      require(spec.symmetric, "dyadic measures are symmetric; symmetric flag disagrees");
      break;
    }
    case MeasureKind::TabulatedDensity: {
      const auto& p = std::get<TabulatedDensityParams>(spec.params);
      require(spec.symmetric == p.symmetric_extension,
              "symmetric flag disagrees with the table's symmetric_extension");
      break;
    }
    case MeasureKind::OscillatingStable: {
      const auto& p = std::get<OscillatingStableParams>(spec.params);
      require(p.alpha_minus > 0.0 && p.alpha_minus <= p.alpha_plus && p.alpha_plus < 2.0,
              "need 0 < alpha_minus <= alpha_plus < 2");
      require(p.u_min > 0.0 && p.u_max > p.u_min && p.points_per_decade >= 4.0,
              "bad oscillating table range");
      require(spec.symmetric, "oscillating measures are symmetric; symmetric flag disagrees");
      break;
    }
  }
}

std::shared_ptr<const MeasureImpl> make_impl(const LevyMeasureSpec& spec) {
  switch (spec.kind) {
    case MeasureKind::PowerLaw:
      return std::make_shared<PowerLawMeasure>(std::get<PowerLawParams>(spec.params));
    case MeasureKind::DyadicAtoms:
      return std::make_shared<DyadicMeasure>(std::get<DyadicAtomsParams>(spec.params));
    case MeasureKind::TabulatedDensity:
      return std::make_shared<TabulatedMeasure>(std::get<TabulatedDensityParams>(spec.params));
    case MeasureKind::OscillatingStable: {
      const auto& p = std::get<OscillatingStableParams>(spec.params);
      auto build = build_oscillating_density(p.alpha_minus, p.alpha_plus, p.modulator, p.u_min,
                                             p.u_max, p.points_per_decade);
      return std::make_shared<TabulatedMeasure>(build.table);
    }
  }
  throw Error(ErrorCode::Internal, "unknown measure kind");
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  std::string s = os.str();
  return std::string(16 - s.size(), '0') + s;
}

}  // namespace

// ----------------------------------------------------------------- wrapper

LevyMeasure::LevyMeasure(const LevyMeasureSpec& spec) : spec_(spec) {
  check_params(spec_);
  impl_ = make_impl(spec_);
  hash_ = hex64(numerics::fnv1a(spec_to_json(spec_).dump()));
}

bool LevyMeasure::symmetric() const { return impl_->symmetric(); }
bool LevyMeasure::atomic() const { return impl_->atomic(); }

double LevyMeasure::second_moment_below(double eps, bool strict) const {
  if (!(eps > 0.0)) return 0.0;
  return impl_->second_moment_below(eps, strict);
}

double LevyMeasure::tail_mass(double r, bool inclusive) const {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidParameters, "tail_mass needs r > 0");
  return impl_->tail_mass(r, inclusive);
}

double LevyMeasure::first_moment_band(double lo, double hi) const {
  if (!(hi > lo)) return 0.0;
  return impl_->first_moment_band(lo, hi);
}

double LevyMeasure::compensator_shift(double r) const {
  if (r < 1.0) return first_moment_band(r, 1.0);
  return -first_moment_band(1.0, r);
}

double LevyMeasure::re_psi(double xi) const { return impl_->re_psi(xi); }

double LevyMeasure::im_psi(double xi) const { return spec_.drift_a * xi + impl_->im_psi(xi); }

std::complex<double> LevyMeasure::psi_small(double xi, double r) const {
  return impl_->psi_small(xi, r);
}

std::complex<double> LevyMeasure::lambda_hat(double xi, double r) const {
  return impl_->lambda_hat(xi, r);
}

std::vector<Atom> LevyMeasure::atoms_in(double lo, double hi) const {
  return impl_->atoms_in(lo, hi);
}

double LevyMeasure::sample_band(double lo, double hi, double u1, double u2) const {
  return impl_->sample_band(lo, hi, u1, u2);
}

double LevyMeasure::density(double u) const { return impl_->density(u); }

// -------------------------------------------------------------- validation

ValidationReport validate(const LevyMeasureSpec& spec) {
  LevyMeasure mu(spec);
  ValidationReport rep;
  rep.lk_integral = mu.second_moment_below(1.0, false) + mu.tail_mass(1.0, false);
  rep.symmetric_declared = spec.symmetric;
  rep.symmetric_measure = mu.symmetric();
  rep.symmetry_consistent = rep.symmetric_declared == rep.symmetric_measure;

  switch (spec.kind) {
    case MeasureKind::PowerLaw: {
      const auto& p = std::get<PowerLawParams>(spec.params);
      for (int j = 0; j <= 10; ++j) rep.mass_sequence.push_back(mu.tail_mass(std::exp2(-j)));
      std::ostringstream os;
      os << "analytic: mu(|u|>eps) = 2C eps^-alpha / alpha with alpha=" << p.alpha
         << " -> infinity as eps -> 0";
      rep.divergence_certificate = os.str();
      break;
    }
    case MeasureKind::DyadicAtoms: {
      const auto& p = std::get<DyadicAtomsParams>(spec.params);
      // Truncated total mass 2 sum_{n_min}^{n_max} 2^{n gamma}, n_max doubled.
      int n_max = p.n_max.value_or(16);
      if (n_max <= 0) n_max = 16;
      for (int k = 0; k < 6; ++k, n_max *= 2) {
        const double mass = 2.0 * (std::exp2((n_max + 1) * p.gamma) - std::exp2(p.n_min * p.gamma)) /
                            (std::exp2(p.gamma) - 1.0);
        rep.mass_sequence.push_back(mass);
      }
      std::ostringstream os;
      os << "analytic: truncated mass grows like 2^{n_max gamma}/(2^gamma - 1) with gamma=" << p.gamma
         << " > 0; doubling n_max multiplies it without bound";
      rep.divergence_certificate = os.str();
      break;
    }
    case MeasureKind::TabulatedDensity:
    case MeasureKind::OscillatingStable: {
      const auto& tab = static_cast<const TabulatedMeasure&>(mu.impl());
      const double s = tab.origin_slope();
      double eps = 1.0;
      if (spec.kind == MeasureKind::TabulatedDensity) {
        eps = std::get<TabulatedDensityParams>(spec.params).u.front();
      } else {
        eps = std::get<OscillatingStableParams>(spec.params).u_min;
      }
      for (int k = 0; k < 8; ++k, eps *= 0.5) rep.mass_sequence.push_back(mu.tail_mass(eps));
      const double last_ratio = rep.mass_sequence.back() / rep.mass_sequence[rep.mass_sequence.size() - 2];
      std::ostringstream os;
      os << "heuristic: origin slope " << s << ", mass ratio per halving of eps " << last_ratio;
      rep.divergence_certificate = os.str();
      if (!(s < -1.0) || !(last_ratio > 1.0 + 1e-6)) {
        throw Error(ErrorCode::FiniteActivity,
                    "tail mass does not diverge at the origin (" + rep.divergence_certificate + ")");
      }
      if (spec.kind == MeasureKind::OscillatingStable) {
        const auto& p = std::get<OscillatingStableParams>(spec.params);
        if (p.modulator == Modulator::Default) {
          rep.notes.push_back(
              "modulator alpha(v) = (a-+a+)/2 + ((a+-a-)/2) sin(ln(1+ln(1+v))) is a library default, "
              "not a prescribed choice");
        }
        if (p.modulator == Modulator::LogSine) {
          rep.notes.push_back("modulator does not satisfy v alpha'(v) -> 0; accepted and flagged");
        }
      }
      break;
    }
  }
  rep.infinite_activity = true;
  return rep;
}

double truncated_second_moment(const LevyMeasure& mu, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameters, "eps must be positive");
  return mu.second_moment_below(eps, false);
}

double tail_mass(const LevyMeasure& mu, double r) { return mu.tail_mass(r, false); }

// ------------------------------------------------------ oscillating example

double modulator_alpha(Modulator mod, double alpha_minus, double alpha_plus, double v) {
  const double mid = 0.5 * (alpha_minus + alpha_plus);
  const double amp = 0.5 * (alpha_plus - alpha_minus);
  if (v <= 0.0 || mod == Modulator::Constant) return mid;
  if (mod == Modulator::LogSine) return mid + amp * std::sin(std::log1p(v));
  return mid + amp * std::sin(std::log1p(std::log1p(v)));
}

OscillatingBuild build_oscillating_density(double alpha_minus, double alpha_plus, Modulator modulator,
                                           double u_min, double u_max, double points_per_decade) {
  require(alpha_minus > 0.0 && alpha_minus <= alpha_plus && alpha_plus < 2.0,
          "need 0 < alpha_minus <= alpha_plus < 2");
  const auto alpha = [&](double v) { return modulator_alpha(modulator, alpha_minus, alpha_plus, v); };
  const double a0 = alpha(0.0);
  const auto dtheta = [&](double w) { return std::exp(alpha(w) * w); };

  // theta(v) = int_{-inf}^v e^{alpha(w) w} dw; closed form for v <= 0.
  const auto theta_from = [&](double v_known, double theta_known, double v) {
    if (v <= 0.0) return std::exp(a0 * v) / a0;
    const double start = std::max(v_known, 0.0);
    const double base = v_known <= 0.0 ? 1.0 / a0 : theta_known;
    return base + numerics::integrate(dtheta, start, v, 1e-13).value;
  };

  const std::size_t n =
      static_cast<std::size_t>(std::lround(std::log10(u_max / u_min) * points_per_decade)) + 1;
  const auto r_grid = numerics::logspace(u_min, u_max, n);
  const double h = 1e-4;  // central difference step in ln r

  // Walk v = -ln r upward (r downward) so theta accumulates incrementally.
  std::vector<double> fprime(n);
  std::vector<double> scale(n);
  double v_prev = -1.0, th_prev = std::exp(-a0) / a0;
  for (std::size_t k = n; k-- > 0;) {
    const double r = r_grid[k];
    const double v = -std::log(r);
    const double th_lo = theta_from(v_prev, th_prev, v - h);  // F at r e^{h}
    const double th_mid = theta_from(v - h, th_lo, v);
    const double th_hi = theta_from(v, th_mid, v + h);        // F at r e^{-h}
    const double f_plus = r * r * std::exp(2.0 * h) * th_lo;
    const double f_minus = r * r * std::exp(-2.0 * h) * th_hi;
    fprime[k] = (f_plus - f_minus) / (r * (std::exp(h) - std::exp(-h)));
    scale[k] = 2.0 * r * th_mid;
    v_prev = v;
    th_prev = th_mid;
  }

  OscillatingBuild out;
  out.table.symmetric_extension = true;
  out.table.tail_exponent = a0;
  for (std::size_t k = 0; k < n; ++k) {
    const double rel = fprime[k] / scale[k];
    out.max_negative_derivative = std::min(out.max_negative_derivative, rel);
    if (fprime[k] <= 0.0) {
      if (rel < -1e-9) {
        throw Error(ErrorCode::MonotonicityViolation,
                    "F'(r) < 0 at r=" + std::to_string(r_grid[k]) + " (relative " + std::to_string(rel) +
                        "); the modulator breaks the monotonicity of phi(xi)/xi^2");
      }
      ++out.clipped_points;
      continue;
    }
    out.table.u.push_back(r_grid[k]);
    out.table.m.push_back(fprime[k] / (2.0 * r_grid[k] * r_grid[k]));
  }
  out.modulator_decays = modulator != Modulator::LogSine;
  if (!out.modulator_decays) {
    out.notes.push_back("modulator does not satisfy v alpha'(v) -> 0; accepted and flagged");
  }
  if (out.clipped_points > 0) {
    out.notes.push_back(std::to_string(out.clipped_points) +
                        " knots with F' clipped to zero were dropped from the table");
  }
  out.notes.push_back("psi^L(xi) = theta(ln xi) with theta(v) = int_{-inf}^v e^{alpha(w) w} dw");
  return out;
}

double stable_constant(double alpha) { return 0.5 / numerics::cos_kernel_total(alpha); }

// -------------------------------------------------------------------- JSON

std::string to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::PowerLaw: return "PowerLaw";
    case MeasureKind::DyadicAtoms: return "DyadicAtoms";
    case MeasureKind::TabulatedDensity: return "TabulatedDensity";
    case MeasureKind::OscillatingStable: return "OscillatingStable";
  }
  return "?";
}

std::string to_string(Modulator mod) {
  switch (mod) {
    case Modulator::Default: return "default";
    case Modulator::Constant: return "constant";
    case Modulator::LogSine: return "log_sine";
  }
  return "?";
}

namespace {

MeasureKind kind_from(const std::string& s) {
  for (auto k : {MeasureKind::PowerLaw, MeasureKind::DyadicAtoms, MeasureKind::TabulatedDensity,
                 MeasureKind::OscillatingStable}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidParameters, "unknown measure kind '" + s + "'");
}

Modulator modulator_from(const std::string& s) {
  for (auto m : {Modulator::Default, Modulator::Constant, Modulator::LogSine}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::InvalidParameters, "unknown modulator '" + s + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

LevyMeasureSpec preset(const std::string& name, const nlohmann::json& params) {
  const nlohmann::json p = params.is_object() ? params : nlohmann::json::object();
  LevyMeasureSpec spec;
  spec.drift_a = get_or(p, "drift_a", 0.0);
  spec.symmetric = true;
  spec.label = name;
  if (name == "cauchy") {
    spec.kind = MeasureKind::PowerLaw;
    spec.params = PowerLawParams{1.0, 1.0 / std::numbers::pi};
  } else if (name == "stable") {
    const double alpha = get_or(p, "alpha", 1.5);
    require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0, 2)");
    spec.kind = MeasureKind::PowerLaw;
    spec.params = PowerLawParams{alpha, get_or(p, "c_alpha", stable_constant(alpha))};
  } else if (name == "dyadic") {
    DyadicAtomsParams d;
    d.gamma = get_or(p, "gamma", 1.0);
    d.upsilon = get_or(p, "upsilon", 1.0);
    d.n_min = get_or(p, "n_min", -60);
    if (p.contains("n_max")) d.n_max = p.at("n_max").get<int>();
    spec.kind = MeasureKind::DyadicAtoms;
    spec.params = d;
  } else if (name == "oscillating") {
    OscillatingStableParams o;
    o.alpha_minus = get_or(p, "alpha_minus", 0.8);
    o.alpha_plus = get_or(p, "alpha_plus", 1.6);
    o.modulator = modulator_from(get_or<std::string>(p, "modulator", "default"));
    spec.kind = MeasureKind::OscillatingStable;
    spec.params = o;
  } else {
    throw Error(ErrorCode::InvalidParameters, "unknown preset '" + name + "'");
  }
  return spec;
}

LevyMeasureSpec spec_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("preset")) {
      auto spec = preset(j.at("preset").get<std::string>(), j.value("params", nlohmann::json::object()));
      if (j.contains("drift_a")) spec.drift_a = j.at("drift_a").get<double>();
      return spec;
    }
    LevyMeasureSpec spec;
    spec.kind = kind_from(j.at("kind").get<std::string>());
    spec.drift_a = get_or(j, "drift_a", 0.0);
    spec.symmetric = get_or(j, "symmetric", true);
    spec.label = get_or<std::string>(j, "label", "");
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    switch (spec.kind) {
      case MeasureKind::PowerLaw:
        spec.params = PowerLawParams{p.at("alpha").get<double>(), p.at("c_alpha").get<double>()};
        break;
      case MeasureKind::DyadicAtoms: {
        DyadicAtomsParams d;
        d.gamma = p.at("gamma").get<double>();
        d.upsilon = p.at("upsilon").get<double>();
        d.n_min = get_or(p, "n_min", -60);
        if (p.contains("n_max")) d.n_max = p.at("n_max").get<int>();
        spec.params = d;
        break;
      }
      case MeasureKind::TabulatedDensity: {
        TabulatedDensityParams t;
        t.u = p.at("u").get<std::vector<double>>();
        t.m = p.at("m").get<std::vector<double>>();
        t.symmetric_extension = get_or(p, "symmetric_extension", spec.symmetric);
        if (p.contains("tail_exponent")) t.tail_exponent = p.at("tail_exponent").get<double>();
        if (p.contains("origin_exponent")) t.origin_exponent = p.at("origin_exponent").get<double>();
        spec.params = t;
        break;
      }
      case MeasureKind::OscillatingStable: {
        OscillatingStableParams o;
        o.alpha_minus = get_or(p, "alpha_minus", o.alpha_minus);
        o.alpha_plus = get_or(p, "alpha_plus", o.alpha_plus);
        o.modulator = modulator_from(get_or<std::string>(p, "modulator", "default"));
        o.u_min = get_or(p, "u_min", o.u_min);
        o.u_max = get_or(p, "u_max", o.u_max);
        o.points_per_decade = get_or(p, "points_per_decade", o.points_per_decade);
        spec.params = o;
        break;
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParameters, std::string("malformed measure spec: ") + e.what());
  }
}

nlohmann::json spec_to_json(const LevyMeasureSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["drift_a"] = spec.drift_a;
  j["symmetric"] = spec.symmetric;
  if (!spec.label.empty()) j["label"] = spec.label;
  nlohmann::json p = nlohmann::json::object();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PowerLawParams>) {
          p["alpha"] = v.alpha;
          p["c_alpha"] = v.c_alpha;
        } else if constexpr (std::is_same_v<T, DyadicAtomsParams>) {
          p["gamma"] = v.gamma;
          p["upsilon"] = v.upsilon;
          p["n_min"] = v.n_min;
          if (v.n_max) p["n_max"] = *v.n_max;
        } else if constexpr (std::is_same_v<T, TabulatedDensityParams>) {
          p["u"] = v.u;
          p["m"] = v.m;
          p["symmetric_extension"] = v.symmetric_extension;
          if (v.tail_exponent) p["tail_exponent"] = *v.tail_exponent;
          if (v.origin_exponent) p["origin_exponent"] = *v.origin_exponent;
        } else {
          p["alpha_minus"] = v.alpha_minus;
          p["alpha_plus"] = v.alpha_plus;
          p["modulator"] = to_string(v.modulator);
          p["u_min"] = v.u_min;
          p["u_max"] = v.u_max;
          p["points_per_decade"] = v.points_per_decade;
        }
      },
      spec.params);
  j["params"] = p;
  return j;
}

LevyMeasureSpec resolve_spec(const std::string& source) {
  if (!source.empty() && source.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(source);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidParameters, std::string("cannot parse inline spec: ") + e.what());
    }
    return spec_from_json(j);
  }
  if (std::filesystem::exists(source)) {
    std::ifstream in(source);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + source);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidParameters, "cannot parse " + source + ": " + e.what());
    }
    return spec_from_json(j);
  }
  // name or name:key=value,key=value
  const auto colon = source.find(':');
  const std::string name = source.substr(0, colon);
  nlohmann::json params = nlohmann::json::object();
  if (colon != std::string::npos) {
    std::stringstream ss(source.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      require(eq != std::string::npos, "preset parameter '" + item + "' needs key=value");
      const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
      if (key == "modulator") {
        params[key] = val;
      } else if (key == "n_min" || key == "n_max") {
        params[key] = std::stoi(val);
      } else {
        params[key] = std::stod(val);
      }
    }
  }
  return preset(name, params);
}

}  // namespace levykb
