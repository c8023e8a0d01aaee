#include "levykb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

namespace levykb {

double kernel_shape(KernelShape shape, double width, double y) {
  const double a = std::abs(y);
  switch (shape) {
    case KernelShape::Exponential:
      return std::exp(-width * a);
    case KernelShape::Indicator:
      return a <= width * (1.0 + 1e-12) ? 1.0 : 0.0;
    case KernelShape::ExpLog:
      return std::exp(-width * a * std::log1p(a));
  }
  return 0.0;
}

std::string to_string(KernelShape shape) {
  switch (shape) {
    case KernelShape::Exponential: return "exponential";
    case KernelShape::Indicator: return "indicator";
    case KernelShape::ExpLog: return "exp_xlog";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Marginal: return "MARGINAL";
    case Verdict::Fail: return "FAIL";
  }
  return "?";
}

Verdict combine(Verdict a, Verdict b) { return static_cast<int>(a) >= static_cast<int>(b) ? a : b; }

std::string to_string(EstimateId id) {
  switch (id) {
    case EstimateId::OnDiag: return "OnDiag";
    case EstimateId::CompoundUpper: return "CompoundUpper";
    case EstimateId::CompoundLower: return "CompoundLower";
    case EstimateId::DerivUpper: return "DerivUpper";
    case EstimateId::BarUpper: return "BarUpper";
    case EstimateId::BellSubexpCDF: return "BellSubexpCDF";
    case EstimateId::BellSubexpDensity: return "BellSubexpDensity";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Compound sums

CompoundEvaluator::CompoundEvaluator(const Decomposition& dec, double half_width, int m_max, double dx)
    : rho_(dec.rho_t) {
  const double lam = dec.lambda_total;
  m_max_ = m_max >= 0 ? m_max : numerics::poisson_terms_for(lam, 1e-10, 1.0);
  series_tail_ = numerics::poisson_series_tail(lam, m_max_);
  PoissonOptions po;
  po.tol = 1.0;  // the series tail is reported, not enforced here
  po.window = half_width;
  po.dx = dx;
  po.prune_weight = 1e-14;
  const PoissonLaw law = poisson_law(dec, m_max_, po);
  const double e = std::exp(lam);
  dropped_ = law.dropped_mass * e;
  std::vector<std::pair<double, double>> pts;
  if (dec.mu.atomic()) {
    for (const Atom& a : law.atoms) pts.emplace_back(a.position, a.weight * e);
  } else {
    pts.emplace_back(0.0, law.delta0 * e);
    for (std::size_t i = 0; i < law.grid.mass.size(); ++i) {
      if (law.grid.mass[i] > 0.0) pts.emplace_back(law.grid.position(i), law.grid.mass[i] * e);
    }
  }
  std::sort(pts.begin(), pts.end());
  pos_.reserve(pts.size());
  weight_.reserve(pts.size());
  prefix_.assign(1, 0.0);
  for (const auto& [y, w] : pts) {
    if (!pos_.empty() && y == pos_.back()) {
      weight_.back() += w;
      prefix_.back() += w;
      continue;
    }
    pos_.push_back(y);
    weight_.push_back(w);
    prefix_.push_back(prefix_.back() + w);
  }
}

namespace {

// Largest |y| with e^{-w y ln(1+y)} above underflow.
double explog_reach(double w) {
  double lo = 0.0, hi = 1.0;
  while (w * hi * std::log1p(hi) < 745.0) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (w * mid * std::log1p(mid) < 745.0 ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

double CompoundEvaluator::operator()(const CompoundKernelParams& p, double x) const {
  const double sigma = p.scale * std::pow(rho_, p.k + 1);
  double sum = 0.0;
  switch (p.shape) {
    case KernelShape::Exponential: {
      const double c = p.width * rho_;
      for (std::size_t j = 0; j < pos_.size(); ++j) sum += weight_[j] * std::exp(-c * std::abs(x - pos_[j]));
      break;
    }
    case KernelShape::Indicator: {
      const double r = p.width / rho_ * (1.0 + 1e-12);
      const auto lo = std::lower_bound(pos_.begin(), pos_.end(), x - r) - pos_.begin();
      const auto hi = std::upper_bound(pos_.begin(), pos_.end(), x + r) - pos_.begin();
      sum = prefix_[hi] - prefix_[lo];
      break;
    }
    case KernelShape::ExpLog: {
      const double r = explog_reach(p.width) / rho_;
      const auto lo = std::lower_bound(pos_.begin(), pos_.end(), x - r) - pos_.begin();
      const auto hi = std::upper_bound(pos_.begin(), pos_.end(), x + r) - pos_.begin();
      for (auto j = lo; j < hi; ++j) sum += weight_[j] * kernel_shape(p.shape, p.width, (x - pos_[j]) * rho_);
      break;
    }
  }
  return sigma * sum;
}

std::vector<double> CompoundEvaluator::operator()(const CompoundKernelParams& p,
                                                  const std::vector<double>& x) const {
  std::vector<double> out(x.size());
  if (p.shape != KernelShape::Exponential) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (*this)(p, x[i]);
    return out;
  }
  // Two exponential recursive filters over the sorted support.
  const double sigma = p.scale * std::pow(rho_, p.k + 1);
  const double c = p.width * rho_;
  const std::size_t n = x.size(), m = pos_.size();
  double s = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s *= std::exp(-c * (x[i] - x[i - 1]));
    for (; j < m && pos_[j] <= x[i]; ++j) s += weight_[j] * std::exp(-c * (x[i] - pos_[j]));
    out[i] = s;
  }
  s = 0.0;
  std::size_t jr = m;
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n) s *= std::exp(-c * (x[i + 1] - x[i]));
    for (; jr > 0 && pos_[jr - 1] > x[i]; --jr) s += weight_[jr - 1] * std::exp(-c * (pos_[jr - 1] - x[i]));
    out[i] = sigma * (out[i] + s);
  }
  return out;
}

std::vector<double> CompoundEvaluator::edges(double width, double lo, double hi) const {
  const double r = width / rho_;
  std::vector<double> e;
  for (double y : pos_) {
    for (double v : {y - r, y + r}) {
      if (v >= lo && v <= hi) e.push_back(v);
    }
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

double compound_eval(const CompoundKernelParams& p, const Decomposition& dec, double x) {
  // Window wide enough that the kernel beyond it is below the series tail.
  double reach = 40.0;
  if (p.shape == KernelShape::Exponential) reach = std::max(reach, 40.0 / p.width);
  if (p.shape == KernelShape::Indicator) reach = p.width + 1.0;
  const CompoundEvaluator ev(dec, std::abs(x) + reach / dec.rho_t, p.m_max);
  return ev(p, x);
}

// ---------------------------------------------------------------------------
// Grids and certificates

FitGrid refine(const FitGrid& g) {
  FitGrid r = g;
  r.t.clear();
  for (std::size_t i = 0; i < g.t.size(); ++i) {
    if (i > 0) r.t.push_back(std::sqrt(g.t[i - 1] * g.t[i]));
    r.t.push_back(g.t[i]);
  }
  r.x_points = 2 * g.x_points - 1;
  return r;
}

nlohmann::json certificate_to_json(const BoundCertificate& c, bool with_margins) {
  nlohmann::json j;
  j["estimate_id"] = to_string(c.id);
  if (c.id == EstimateId::DerivUpper) j["k"] = c.k;
  j["spec_hash"] = c.spec_hash;
  j["grid"] = {{"t", c.grid.t}, {"x_half_width_scaled", c.grid.half_width}, {"x_points", c.grid.x_points}};
  j["constants"] = c.constants;
  j["margins_summary"] = {{"points", c.points}, {"unresolved", c.unresolved}, {"min_margin", c.min_margin}};
  j["verdict"] = to_string(c.verdict);
  j["caveats"] = c.caveats;
  if (c.refinement) {
    const Refinement& r = *c.refinement;
    j["refinement"] = {{"points", r.points},         {"flips", r.flips},
                       {"flip_fraction", r.flip_fraction}, {"constants", r.constants},
                       {"max_change", r.max_change}};
  }
  if (!c.details.is_null()) j["details"] = c.details;
  if (with_margins) {
    nlohmann::json rows = nlohmann::json::array();
    for (const MarginRow& m : c.margins) rows.push_back({m.t, m.x, m.density, m.bound, m.margin});
    j["margins"] = rows;
  }
  return j;
}

void write_margins_csv(const BoundCertificate& c, std::ostream& os) {
  os << "t,x,density,bound,margin\n" << std::setprecision(17);
  for (const MarginRow& m : c.margins) {
    os << m.t << ',' << m.x << ',' << m.density << ',' << m.bound << ',' << m.margin << '\n';
  }
}

// ---------------------------------------------------------------------------
// Fitting engine

namespace {

enum class Sense { Upper, Lower };

struct Slice {
  double t = 0.0;
  double rho = 0.0;
  double sigma = 0.0;  // rho^{k+1}
  double shift = 0.0;  // density argument is x + shift
  bool coarse = false;
  std::vector<double> x;
  std::vector<double> p;
  double floor = 0.0;
  DensityGrid grid;
  std::shared_ptr<CompoundEvaluator> comp;
  mutable std::shared_ptr<DensityEvaluator> ev;
};

struct SliceRequest {
  DensityKind which = DensityKind::Full;
  int k = 0;
  bool absolute = true;  // fit |d^k p|
  bool lower_shift = false;
  bool compound = true;
};

struct Family {
  Sense sense = Sense::Upper;
  std::vector<double> widths;
  // Unit-scale kernel sum at the slice grid and at a point.
  std::function<std::vector<double>(const Slice&, double)> grid_kernel;
  std::function<double(const Slice&, double, double)> point_kernel;
  std::function<double(double, double)> objective;  // (width, constant), smaller is better
  bool use_edges = false;
  double window = std::numeric_limits<double>::infinity();  // scaled |x| limit
};

std::vector<double> scaled_points(const FitGrid& g) {
  if (g.x_points < 2 || !(g.half_width > 0.0)) throw Error(ErrorCode::InvalidParameters, "x grid needs >= 2 points");
  return numerics::linspace(-g.half_width, g.half_width, static_cast<std::size_t>(g.x_points));
}

void check_grid(const FitGrid& g) {
  if (g.t.empty()) throw Error(ErrorCode::InvalidParameters, "empty t grid");
  for (double t : g.t) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidParameters, "t grid must be positive");
  }
  if (!std::is_sorted(g.t.begin(), g.t.end())) throw Error(ErrorCode::InvalidParameters, "t grid must be sorted");
}

DensityOptions density_options(const LevyMeasure& mu, const FitOptions& opts) {
  DensityOptions d = opts.density;
  if (!d.growth) d.growth = growth_constants(mu);
  return d;
}

// x_t for the lower estimates.
double locate_mode(const LevyMeasure& mu, double t, double r, const DensityOptions& dopt) {
  DensityOptions o = dopt;
  o.rho_t = r;
  const auto xb = numerics::linspace(-10.0 / r, 10.0 / r, 2001);
  return locate_xt(mu, density_bar(mu, t, xb, 0, o), o);
}

Slice make_slice(const LevyMeasure& mu, double t, const std::vector<double>& s, double half_width,
                 const SliceRequest& req, const FitOptions& opts) {
  const DensityOptions dopt = density_options(mu, opts);
  Slice sl;
  sl.t = t;
  sl.rho = rho(mu, t);
  sl.sigma = std::pow(sl.rho, req.k + 1);
  const Decomposition dec = build_decomposition(mu, t, sl.rho);
  // Z_t = Zbar_t + Zhat_t - a_t, so Zbar_t + Zhat_t has density p_t(. - a_t).
  sl.shift = req.which == DensityKind::Bar ? 0.0 : -dec.a_t;
  if (req.lower_shift) sl.shift += locate_mode(mu, t, sl.rho, dopt);
  sl.x.resize(s.size());
  std::vector<double> arg(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    sl.x[i] = s[i] / sl.rho;
    arg[i] = sl.x[i] + sl.shift;
  }
  DensityOptions o = dopt;
  o.rho_t = sl.rho;
  sl.grid = req.which == DensityKind::Full ? density(mu, t, arg, req.k, o) : density_bar(mu, t, arg, req.k, o);
  sl.p = sl.grid.values;
  double vmax = 0.0;
  for (double& v : sl.p) {
    if (req.absolute) v = std::abs(v);
    vmax = std::max(vmax, std::abs(v));
  }
  sl.floor = opts.resolve_floor * vmax;
  if (req.compound) sl.comp = std::make_shared<CompoundEvaluator>(dec, (half_width + 50.0) / sl.rho);
  return sl;
}

std::vector<Slice> build_slices(const LevyMeasure& mu, const FitGrid& coarse, const FitGrid& fine,
                                const SliceRequest& req, const FitOptions& opts) {
  const auto s = scaled_points(fine);
  std::vector<Slice> out;
  for (double t : fine.t) {
    out.push_back(make_slice(mu, t, s, fine.half_width, req, opts));
    out.back().coarse = std::find(coarse.t.begin(), coarse.t.end(), t) != coarse.t.end();
  }
  return out;
}

double density_at(const LevyMeasure& mu, const Slice& sl, double x, bool absolute, const FitOptions& opts) {
  if (!sl.ev) {
    DensityOptions o = density_options(mu, opts);
    o.rho_t = sl.rho;
    sl.ev = std::make_shared<DensityEvaluator>(mu, sl.grid, o);
  }
  const double v = (*sl.ev)(x + sl.shift);
  return absolute ? std::abs(v) : v;
}

struct Engine {
  const LevyMeasure& mu;
  const FitOptions& opts;
  const Family& fam;
  std::vector<Slice>& slices;
  std::size_t stride;  // x stride of the coarse grid inside the fine one
  bool absolute;
  SliceRequest req;
  std::vector<double> s;  // fine scaled x points
  double half_width;
  std::vector<std::vector<std::vector<double>>> kernels;  // [width][slice][x]
  mutable std::map<double, std::shared_ptr<const Slice>> extra;  // off-grid times

  bool better(double a, double b) const { return fam.sense == Sense::Upper ? a > b : a < b; }

  bool in_domain(const Slice& sl, std::size_t i) const {
    return std::abs(sl.x[i] * sl.rho) <= fam.window * (1.0 + 1e-12);
  }

  void prepare() {
    kernels.assign(fam.widths.size(), {});
    for (std::size_t w = 0; w < fam.widths.size(); ++w) {
      for (const Slice& sl : slices) kernels[w].push_back(fam.grid_kernel(sl, fam.widths[w]));
    }
  }

  bool uses(const Slice& sl, std::size_t i, bool coarse_only) const {
    return !coarse_only || (sl.coarse && i % stride == 0);
  }

  // Extreme ratio over the chosen subset; infinite for an upper ratio with K = 0.
  double scan(std::size_t w, bool coarse_only) const {
    double e = fam.sense == Sense::Upper ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < slices.size(); ++j) {
      const Slice& sl = slices[j];
      if (coarse_only && !sl.coarse) continue;
      for (std::size_t i = 0; i < sl.x.size(); ++i) {
        if (!uses(sl, i, coarse_only) || !in_domain(sl, i) || std::abs(sl.p[i]) < sl.floor) continue;
        const double k = kernels[w][j][i];
        if (k <= 0.0) {
          if (fam.sense == Sense::Upper) return std::numeric_limits<double>::infinity();
          continue;
        }
        const double r = sl.p[i] / k;
        if (better(r, e)) e = r;
      }
    }
    return e;
  }

  double ratio_at(const Slice& sl, double width, double x) const {
    if (std::abs(x * sl.rho) > fam.window * (1.0 + 1e-12)) return std::numeric_limits<double>::quiet_NaN();
    const double p = density_at(mu, sl, x, absolute, opts);
    const double k = fam.point_kernel(sl, width, x);
    if (std::abs(p) < sl.floor || !(k > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return p / k;
  }

  // Golden section for the extreme of the ratio on [a, b].
  double golden(const Slice& sl, double width, double a, double b) const {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    const auto f = [&](double x) {
      const double r = ratio_at(sl, width, x);
      if (std::isnan(r)) return -std::numeric_limits<double>::infinity();
      return fam.sense == Sense::Upper ? r : -r;
    };
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    double best = std::max(fc, fd);
    for (int it = 0; it < 40 && (b - a) * sl.rho > 1e-10; ++it) {
      if (fc >= fd) {
        b = d; d = c; fd = fc;
        c = b - g * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + g * (b - a); fd = f(d);
      }
      best = std::max({best, fc, fd});
    }
    return fam.sense == Sense::Upper ? best : -best;
  }

  double slice_extreme(const Slice& sl, const std::vector<double>& kv, std::size_t st) const {
    double e = fam.sense == Sense::Upper ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sl.x.size(); i += st) {
      if (!in_domain(sl, i) || std::abs(sl.p[i]) < sl.floor) continue;
      if (!(kv[i] > 0.0)) {
        if (fam.sense == Sense::Upper) return std::numeric_limits<double>::infinity();
        continue;
      }
      if (better(sl.p[i] / kv[i], e)) e = sl.p[i] / kv[i];
    }
    return e;
  }

  // Grid extreme of one slice refined off-grid around the near-extreme local
  // extrema, and at the jump points of discontinuous kernels.
  double polish_slice(const Slice& sl, const std::vector<double>& kv, double width, std::size_t st, double e) const {
    const double band = 0.02;
    const auto near = [&](double r) { return fam.sense == Sense::Upper ? r >= e / (1.0 + band) : r <= e * (1.0 + band); };
    std::vector<double> r(sl.x.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < sl.x.size(); i += st) {
      if (in_domain(sl, i) && std::abs(sl.p[i]) >= sl.floor && kv[i] > 0.0) r[i] = sl.p[i] / kv[i];
    }
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < sl.x.size(); i += st) {
      if (std::isnan(r[i]) || !near(r[i])) continue;
      const bool left_ok = i < st || std::isnan(r[i - st]) || !better(r[i - st], r[i]);
      const bool right_ok = i + st >= sl.x.size() || std::isnan(r[i + st]) || !better(r[i + st], r[i]);
      if (left_ok && right_ok) cand.emplace_back(r[i], i);
    }
    std::sort(cand.begin(), cand.end(), [&](const auto& a, const auto& b) { return better(a.first, b.first); });
    if (cand.size() > 16) cand.resize(16);
    for (const auto& [rv, i] : cand) {
      const double a = sl.x[i >= st ? i - st : i];
      const double b = sl.x[std::min(i + st, sl.x.size() - 1)];
      const double v = golden(sl, width, a, b);
      if (!std::isnan(v) && std::isfinite(v) && better(v, e)) e = v;
    }
    if (fam.use_edges && sl.comp) {
      const double lim = std::min(fam.window / sl.rho, sl.x.back());
      for (double x : sl.comp->edges(width, -lim, lim)) {
        // Screen with linear interpolation of the grid before evaluating.
        const auto it = std::lower_bound(sl.x.begin(), sl.x.end(), x);
        if (it == sl.x.begin() || it == sl.x.end()) continue;
        const std::size_t i = static_cast<std::size_t>(it - sl.x.begin());
        const double f = (x - sl.x[i - 1]) / (sl.x[i] - sl.x[i - 1]);
        const double pe = (1.0 - f) * sl.p[i - 1] + f * sl.p[i];
        const double k = fam.point_kernel(sl, width, x);
        if (!(k > 0.0) || !near(pe / k)) continue;
        const double v = ratio_at(sl, width, x);
        if (!std::isnan(v) && better(v, e)) e = v;
      }
    }
    return e;
  }

  double polish(std::size_t w, bool coarse_only, double e) const {
    const std::size_t st = coarse_only ? stride : 1;
    for (std::size_t j = 0; j < slices.size(); ++j) {
      if (coarse_only && !slices[j].coarse) continue;
      e = polish_slice(slices[j], kernels[w][j], fam.widths[w], st, e);
    }
    return e;
  }

  // Refined extreme of a slice built at an off-grid time.
  double extreme_at(double t, double width, std::size_t st) const {
    auto& slot = extra[t];
    if (!slot) slot = std::make_shared<const Slice>(make_slice(mu, t, s, half_width, req, opts));
    const Slice& sl = *slot;
    const auto kv = fam.grid_kernel(sl, width);
    return polish_slice(sl, kv, width, st, slice_extreme(sl, kv, st));
  }

  // Golden section in ln t over the grid intervals whose end slices come
  // within 10% of the current extreme (at most two).
  double polish_t(std::size_t w, bool coarse_only, double e) const {
    const std::size_t st = coarse_only ? stride : 1;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < slices.size(); ++j) {
      if (!coarse_only || slices[j].coarse) idx.push_back(j);
    }
    if (idx.size() < 2) return e;
    std::vector<double> ext;
    for (std::size_t j : idx) ext.push_back(slice_extreme(slices[j], kernels[w][j], st));
    std::vector<std::pair<double, std::size_t>> rank;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      if (!std::isfinite(ext[k]) || !std::isfinite(ext[k + 1])) continue;
      rank.emplace_back(better(ext[k], ext[k + 1]) ? ext[k] : ext[k + 1], k);
    }
    std::sort(rank.begin(), rank.end(), [&](const auto& a, const auto& b) { return better(a.first, b.first); });
    const double width = fam.widths[w];
    const double sign = fam.sense == Sense::Upper ? 1.0 : -1.0;
    const auto f = [&](double lt) {
      const double v = extreme_at(std::exp(lt), width, st);
      return std::isfinite(v) ? sign * v : -std::numeric_limits<double>::infinity();
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t r = 0; r < std::min<std::size_t>(2, rank.size()); ++r) {
      if (sign * rank[r].first < sign * e - 0.1 * std::abs(e)) break;
      const std::size_t k = rank[r].second;
      double a = std::log(slices[idx[k]].t);
      double b = std::log(slices[idx[k + 1]].t);
      double c = b - g * (b - a), d = a + g * (b - a);
      double fc = f(c), fd = f(d);
      double best = std::max(fc, fd);
      for (int it = 0; it < 6; ++it) {
        if (fc >= fd) {
          b = d; d = c; fd = fc;
          c = b - g * (b - a); fc = f(c);
        } else {
          a = c; c = d; fc = fd;
          d = a + g * (b - a); fd = f(d);
        }
        best = std::max({best, fc, fd});
      }
      if (std::isfinite(best) && better(sign * best, e)) e = sign * best;
    }
    // Atomic measures: Lambda_t gains an atom whenever 1/rho_t crosses |u|, so
    // the extreme jumps there and is approached only as a one-sided limit.
    if (mu.atomic()) {
      const double t0 = slices[idx.front()].t, t1 = slices[idx.back()].t;
      std::vector<double> radii;
      for (const Atom& at : mu.atoms_in(1.0 / rho(mu, t0), 1.0 / rho(mu, t1))) radii.push_back(std::abs(at.position));
      std::sort(radii.begin(), radii.end());
      radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
      for (double u : radii) {
        double lo = std::log(t0), hi = std::log(t1);
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (1.0 / rho(mu, std::exp(mid)) < u ? lo : hi) = mid;
        }
        for (double lt : {lo - 1e-9, hi + 1e-9}) {
          if (lt < std::log(t0) || lt > std::log(t1)) continue;
          const double v = sign * f(lt);
          if (std::isfinite(v) && better(v, e)) e = v;
        }
      }
    }
    return e;
  }

  struct Fit {
    std::size_t w = 0;
    double constant = 0.0;
    std::vector<double> scan;
  };

  // Widths ranked by the objective of their polished constants. The grid
  // value is optimistic for every shape, so ranking stops once no unpolished
  // width can beat the best polished one.
  Fit fit(bool coarse_only) const {
    Fit f;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t w = 0; w < fam.widths.size(); ++w) {
      const double c = scan(w, coarse_only);
      f.scan.push_back(c);
      if (std::isfinite(c) && c > 0.0) order.emplace_back(fam.objective(fam.widths[w], c), w);
    }
    if (order.empty()) {
      throw Error(ErrorCode::NoFiniteConstants, "no width gives a finite positive constant on the grid");
    }
    std::sort(order.begin(), order.end());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [bound, w] : order) {
      if (bound >= best) break;
      const double c = polish(w, coarse_only, f.scan[w]);
      const double obj = fam.objective(fam.widths[w], c);
      if (obj < best) {
        best = obj;
        f.w = w;
        f.constant = c;
      }
    }
    f.constant = polish_t(f.w, coarse_only, f.constant);
    return f;
  }

  double margin(const Slice& sl, double bound, double p) const {
    return (fam.sense == Sense::Upper ? bound - p : p - bound) / sl.sigma;
  }
};

struct EngineResult {
  double constant = 0.0;
  double width = 0.0;
  std::vector<double> scan;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Runs the fit, fills constants-independent certificate fields and returns
// the coarse fit. Constant and width names go into the certificate.
EngineResult run_engine(const LevyMeasure& mu, const FitGrid& grid, const Family& fam, const SliceRequest& req,
                        const FitOptions& opts, const std::string& cname, const std::string& wname,
                        BoundCertificate& cert, std::vector<Slice>* keep = nullptr) {
  check_grid(grid);
  const FitGrid fine = opts.verify ? refine(grid) : grid;
  std::vector<Slice> slices = build_slices(mu, grid, fine, req, opts);
  Engine eng{mu,  opts, fam, slices, opts.verify ? std::size_t{2} : std::size_t{1}, req.absolute, req,
             scaled_points(fine), fine.half_width, {}, {}};
  eng.prepare();
  const Engine::Fit f = eng.fit(true);
  EngineResult res{f.constant, fam.widths[f.w], f.scan};

  cert.grid = grid;
  cert.spec_hash = mu.hash();
  cert.constants[cname] = res.constant;
  if (fam.widths.size() > 1 || !wname.empty()) cert.constants[wname] = res.width;
  cert.points = 0;
  cert.unresolved = 0;
  cert.min_margin = std::numeric_limits<double>::infinity();
  cert.margins.clear();
  Refinement ref;
  double worst = 0.0, worst_t = 0.0, worst_x = 0.0;
  for (std::size_t j = 0; j < slices.size(); ++j) {
    const Slice& sl = slices[j];
    const auto& kv = eng.kernels[f.w][j];
    for (std::size_t i = 0; i < sl.x.size(); ++i) {
      if (!eng.in_domain(sl, i)) continue;
      if (fam.sense == Sense::Lower && !(kv[i] > 0.0)) continue;
      const double bound = res.constant * kv[i];
      const double m = eng.margin(sl, bound, sl.p[i]);
      const bool resolved = std::abs(sl.p[i]) >= sl.floor;
      if (eng.uses(sl, i, true)) {
        if (opts.keep_margins) cert.margins.push_back({sl.t, sl.x[i], sl.p[i], bound, m});
        if (resolved) {
          ++cert.points;
          cert.min_margin = std::min(cert.min_margin, m);
        } else {
          ++cert.unresolved;
        }
      }
      if (opts.verify && resolved) {
        ++ref.points;
        if (m < -opts.margin_slack) {
          ++ref.flips;
          if (m < worst) {
            worst = m;
            worst_t = sl.t;
            worst_x = sl.x[i];
          }
        }
      }
    }
  }
  const bool ok = std::isfinite(res.constant) && res.constant > 0.0 && cert.min_margin >= -opts.margin_slack;
  cert.verdict = ok ? Verdict::Pass : Verdict::Fail;
  if (opts.verify) {
    ref.flip_fraction = ref.points ? static_cast<double>(ref.flips) / static_cast<double>(ref.points) : 0.0;
    const Engine::Fit g = eng.fit(false);
    ref.constants[cname] = g.constant;
    if (fam.widths.size() > 1 || !wname.empty()) ref.constants[wname] = fam.widths[g.w];
    ref.max_change = std::max(std::abs(g.constant / res.constant - 1.0), std::abs(fam.widths[g.w] / res.width - 1.0));
    if (ref.flips > 0) {
      cert.verdict = combine(cert.verdict, ref.flip_fraction <= opts.flip_fraction_fail ? Verdict::Marginal : Verdict::Fail);
      cert.caveats.push_back(std::to_string(ref.flips) + " of " + std::to_string(ref.points) +
                             " refined-grid points violate the fitted bound (worst margin " + fmt(worst) +
                             " at t=" + fmt(worst_t) + ", x=" + fmt(worst_x) + ")");
    }
    cert.refinement = ref;
  }
  if (cert.unresolved > 0) {
    cert.caveats.push_back(std::to_string(cert.unresolved) +
                           " grid points below the density resolution floor were not fitted");
  }
  nlohmann::json scan = nlohmann::json::array();
  for (std::size_t w = 0; w < fam.widths.size(); ++w) scan.push_back({{wname.empty() ? "width" : wname, fam.widths[w]}, {cname, res.scan[w]}});
  cert.details["width_scan"] = scan;
  if (keep) *keep = std::move(slices);
  return res;
}

std::vector<double> half_octaves(double lo_exp, double hi_exp) {
  std::vector<double> v;
  for (double e = lo_exp; e <= hi_exp + 1e-9; e += 0.5) v.push_back(std::exp2(e));
  return v;
}

Family exponential_compound_family(const FitOptions& opts, int k) {
  Family fam;
  fam.sense = Sense::Upper;
  fam.widths = opts.b2_grid.empty() ? half_octaves(-6, 4) : opts.b2_grid;
  fam.grid_kernel = [k](const Slice& sl, double w) {
    return (*sl.comp)(CompoundKernelParams{KernelShape::Exponential, 1.0, w, k, -1}, sl.x);
  };
  fam.point_kernel = [k](const Slice& sl, double w, double x) {
    return (*sl.comp)(CompoundKernelParams{KernelShape::Exponential, 1.0, w, k, -1}, x);
  };
  const double pen = opts.penalty;
  fam.objective = [pen](double w, double c) { return c * (1.0 + pen / std::sqrt(w)); };
  return fam;
}

}  // namespace

BoundCertificate fit_compound_upper(const LevyMeasure& mu, const FitGrid& grid, const FitOptions& opts) {
  BoundCertificate cert;
  cert.id = EstimateId::CompoundUpper;
  const Family fam = exponential_compound_family(opts, 0);
  run_engine(mu, grid, fam, SliceRequest{DensityKind::Full, 0, true, false, true}, opts, "b1", "b2", cert);
  return cert;
}

BoundCertificate fit_derivative_upper(const LevyMeasure& mu, const FitGrid& grid, int k, const FitOptions& opts) {
  if (k < 1) throw Error(ErrorCode::InvalidParameters, "derivative order must be >= 1");
  BoundCertificate cert;
  cert.id = EstimateId::DerivUpper;
  cert.k = k;
  const Family fam = exponential_compound_family(opts, k);
  run_engine(mu, grid, fam, SliceRequest{DensityKind::Full, k, true, false, true}, opts, "b1", "b2", cert);
  return cert;
}

BoundCertificate fit_bar_upper(const LevyMeasure& mu, const FitGrid& grid, KernelShape shape,
                               std::optional<double> width, const FitOptions& opts) {
  if (shape == KernelShape::Indicator) throw Error(ErrorCode::InvalidParameters, "bar upper fit needs a decaying shape");
  BoundCertificate cert;
  cert.id = EstimateId::BarUpper;
  Family fam;
  fam.sense = Sense::Upper;
  fam.widths = width ? std::vector<double>{*width} : (opts.b2_grid.empty() ? half_octaves(-6, 4) : opts.b2_grid);
  fam.grid_kernel = [shape](const Slice& sl, double w) {
    std::vector<double> k(sl.x.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = sl.sigma * kernel_shape(shape, w, sl.x[i] * sl.rho);
    return k;
  };
  fam.point_kernel = [shape](const Slice& sl, double w, double x) {
    return sl.sigma * kernel_shape(shape, w, x * sl.rho);
  };
  const double pen = opts.penalty;
  fam.objective = [pen](double w, double c) { return c * (1.0 + pen / std::sqrt(w)); };
  run_engine(mu, grid, fam, SliceRequest{DensityKind::Bar, 0, true, false, false}, opts, "b1", "b2", cert);
  cert.details["shape"] = to_string(shape);
  if (shape == KernelShape::ExpLog && !mu.symmetric()) {
    cert.caveats.push_back("the x ln(1+x) kernel is justified for symmetric measures only");
  }
  return cert;
}

BoundCertificate fit_compound_lower(const LevyMeasure& mu, const FitGrid& grid, const FitOptions& opts) {
  BoundCertificate cert;
  cert.id = EstimateId::CompoundLower;
  Family fam;
  fam.sense = Sense::Lower;
  fam.widths = opts.b4_grid.empty() ? half_octaves(-4, 2) : opts.b4_grid;
  fam.window = opts.lower_window;
  fam.use_edges = true;
  fam.grid_kernel = [](const Slice& sl, double w) {
    return (*sl.comp)(CompoundKernelParams{KernelShape::Indicator, 1.0, w, 0, -1}, sl.x);
  };
  fam.point_kernel = [](const Slice& sl, double w, double x) {
    return (*sl.comp)(CompoundKernelParams{KernelShape::Indicator, 1.0, w, 0, -1}, x);
  };
  // Largest kernel mass 2 b3 b4.
  fam.objective = [](double w, double c) { return -c * w; };
  std::vector<Slice> slices;
  run_engine(mu, grid, fam, SliceRequest{DensityKind::Full, 0, false, true, true}, opts, "b3", "b4", cert,
             &slices);
  nlohmann::json modes = nlohmann::json::array();
  for (const Slice& sl : slices) {
    if (sl.coarse) modes.push_back({{"t", sl.t}, {"shift", sl.shift}});
  }
  cert.details["density_shift"] = modes;

  if (mu.kind() == MeasureKind::DyadicAtoms) {
    // p_t(2^{-n upsilon}) against t rho_t 2^{n gamma} for the atoms of Lambda_t
    // inside the fitted x range.
    const auto& prm = std::get<DyadicAtomsParams>(mu.spec().params);
    nlohmann::json rows = nlohmann::json::array();
    double c = std::numeric_limits<double>::infinity();
    for (const Slice& sl : slices) {
      if (!sl.coarse) continue;
      const double reach = grid.half_width / sl.rho;
      for (int n = prm.n_min; prm.n_max ? n <= *prm.n_max : true; ++n) {
        const double u = std::exp2(-n * prm.upsilon);
        if (u <= 1.0 / sl.rho) break;  // n > n_0(t)
        if (u > reach) continue;
        const double p = density_at(mu, sl, u - sl.shift, false, opts);
        const double scale = sl.t * sl.rho * std::exp2(n * prm.gamma);
        rows.push_back({{"t", sl.t}, {"n", n}, {"x", u}, {"density", p}, {"ratio", p / scale}});
        c = std::min(c, p / scale);
      }
    }
    cert.details["atom_table"] = rows;
    cert.constants["atom_c"] = std::isfinite(c) ? c : 0.0;
    if (!(c > 0.0) || rows.empty()) {
      cert.caveats.push_back("atom table empty or with a non-positive ratio");
    }
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Bell-type bounds

TailSpec TailSpec::power(Form form, double alpha, double scale) {
  TailSpec s;
  s.form = form;
  s.family = "power";
  s.alpha = alpha;
  s.scale = scale;
  if (form == Form::Cdf) {
    s.fn = [alpha, scale](double v) { return v < 1.0 ? 1.0 : scale * std::pow(v, -alpha); };
  } else {
    s.fn = [alpha, scale](double v) { return v < 1.0 ? 0.0 : scale * std::pow(v, -1.0 - alpha); };
  }
  return s;
}

TailSpec TailSpec::from_json(const nlohmann::json& j) {
  const std::string form = j.value("form", "cdf");
  if (form != "cdf" && form != "density") throw Error(ErrorCode::InvalidParameters, "tail form must be cdf or density");
  const Form f = form == "cdf" ? Form::Cdf : Form::Density;
  const std::string family = j.value("family", "power");
  TailSpec s;
  if (family == "power") {
    s = power(f, j.value("alpha", 1.0), j.value("scale", 1.0));
    if (!(s.alpha > 0.0) || !(s.scale > 0.0)) throw Error(ErrorCode::InvalidParameters, "power tail needs alpha, scale > 0");
  } else if (family == "dirac") {
    s.form = f;
    s.family = "dirac";
    s.fn = [f](double v) { return f == Form::Cdf && v < 0.0 ? 1.0 : 0.0; };
  } else {
    throw Error(ErrorCode::InvalidParameters, "unknown tail family '" + family + "'");
  }
  s.b2 = j.value("b2", 1.0);
  if (!(s.b2 > 0.0)) throw Error(ErrorCode::InvalidParameters, "b2 must be > 0");
  return s;
}

nlohmann::json TailSpec::to_json() const {
  return {{"form", form == Form::Cdf ? "cdf" : "density"}, {"family", family}, {"alpha", alpha},
          {"scale", scale}, {"b2", b2}};
}

namespace {

// Spot checks of the sub-exponential property.
nlohmann::json subexp_checks(const TailSpec& tail, bool& ok) {
  nlohmann::json j;
  ok = true;
  nlohmann::json shift = nlohmann::json::array();
  for (double y : {1.0, 5.0}) {
    for (double x : {1e2, 1e3, 1e4}) {
      const double r = tail.fn(x - y) / tail.fn(x);
      shift.push_back({{"x", x}, {"y", y}, {"ratio", r}});
      if (x == 1e4 && !(std::abs(r - 1.0) <= 0.1)) ok = false;
    }
  }
  j["shift_ratio"] = shift;
  // Self-convolution against twice the tail, normalised by the total mass.
  nlohmann::json conv = nlohmann::json::array();
  const auto& g = tail.fn;
  for (double x : {1e2, 1e3, 1e4}) {
    double r = std::numeric_limits<double>::quiet_NaN();
    try {
      if (tail.form == TailSpec::Form::Density) {
        const double mass = numerics::integrate([&](double s) { return g(std::exp(s)) * std::exp(s); }, 0.0, 60.0, 1e-9).value;
        const double half = numerics::integrate([&](double y) { return g(x - y) * g(y); }, 1.0, 0.5 * x, 1e-9).value;
        r = 2.0 * half / (2.0 * mass * g(x));
      } else {
        // P(X1 + X2 > x) = (1 - G(x)) + int_1^x (1 - G(x - y)) dG(y), dG = -(1 - G)'.
        const auto dens = [&](double y) {
          const double h = 1e-6 * y;
          return (g(y - h) - g(y + h)) / (2.0 * h);
        };
        const double in = numerics::integrate([&](double y) { return g(x - y) * dens(y); }, 1.0 + 1e-9, x, 1e-9).value;
        r = (g(x) + in) / (2.0 * g(x));
      }
    } catch (const Error&) {
    }
    conv.push_back({{"x", x}, {"ratio", r}});
    if (x == 1e4 && !(std::abs(r - 1.0) <= 0.25)) ok = false;
  }
  j["self_convolution_ratio"] = conv;
  j["ok"] = ok;
  return j;
}

}  // namespace

BoundCertificate bell_upper(const LevyMeasure& mu, const FitGrid& grid, const TailSpec& tail, const FitOptions& opts) {
  check_grid(grid);
  if (!tail.fn) throw Error(ErrorCode::InvalidParameters, "tail function missing");
  BoundCertificate cert;
  cert.id = tail.form == TailSpec::Form::Cdf ? EstimateId::BellSubexpCDF : EstimateId::BellSubexpDensity;
  if (tail.form == TailSpec::Form::Density && mu.atomic()) {
    throw Error(ErrorCode::PreconditionFailed, "density-form tail condition needs a Levy density; measure is atomic");
  }
  // Precondition on a (t, v) grid, v >= 1 in units of 1/rho_t.
  const FitGrid fine = opts.verify ? refine(grid) : grid;
  const auto v_grid = numerics::logspace(1.0, 1e4, 81);
  double c_coarse = 0.0, c_fine = 0.0;
  for (double t : fine.t) {
    const bool coarse = std::find(grid.t.begin(), grid.t.end(), t) != grid.t.end();
    const double r = rho(mu, t);
    for (double v : v_grid) {
      double lhs, rhs = tail.fn(v);
      if (tail.form == TailSpec::Form::Cdf) {
        lhs = t * mu.tail_mass(v / r);
      } else {
        lhs = t / r * std::max(mu.density(v / r), mu.density(-v / r));
      }
      if (lhs <= 0.0) continue;
      if (!(rhs > 0.0)) {
        std::ostringstream msg;
        msg << "tail condition fails at t=" << t << ", v=" << v << ": measure side " << lhs << ", tail side 0";
        throw Error(ErrorCode::PreconditionFailed, msg.str());
      }
      c_fine = std::max(c_fine, lhs / rhs);
      if (coarse) c_coarse = std::max(c_coarse, lhs / rhs);
    }
  }
  bool subexp_ok = true;
  cert.details["subexponential_checks"] = subexp_checks(tail, subexp_ok);
  cert.details["tail"] = tail.to_json();

  Family fam;
  fam.sense = Sense::Upper;
  fam.widths = {tail.b2};
  const auto fn = tail.fn;
  const auto env = [fn](double b2, double y) {
    const double a = std::abs(y);
    return std::exp(-b2 * a) + (a >= 1.0 ? fn(a) : 0.0);
  };
  fam.grid_kernel = [env](const Slice& sl, double w) {
    std::vector<double> k(sl.x.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = sl.sigma * env(w, sl.x[i] * sl.rho);
    return k;
  };
  fam.point_kernel = [env](const Slice& sl, double w, double x) { return sl.sigma * env(w, x * sl.rho); };
  fam.objective = [](double, double c) { return c; };
  run_engine(mu, grid, fam, SliceRequest{DensityKind::Full, 0, true, false, false}, opts, "C1", "", cert);
  cert.constants.erase("");
  cert.constants["C"] = c_coarse;
  if (cert.refinement) cert.refinement->constants["C"] = c_fine;
  if (cert.refinement && c_coarse > 0.0) {
    cert.refinement->max_change = std::max(cert.refinement->max_change, std::abs(c_fine / c_coarse - 1.0));
  }
  if (!subexp_ok) {
    cert.verdict = Verdict::Fail;
    cert.caveats.push_back("sub-exponential spot checks failed for the supplied tail");
  }
  return cert;
}

// ---------------------------------------------------------------------------
// On-diagonal constants

namespace {

struct DiagonalRow {
  double t, rho, max, ratio, argmax;
};

DiagonalRow diagonal_max(const LevyMeasure& mu, double t, const DensityOptions& dopt) {
  const double r = rho(mu, t);
  const Decomposition dec = build_decomposition(mu, t, r);
  const double centre = -dec.a_t;
  const auto x = numerics::linspace(centre - 10.0 / r, centre + 10.0 / r, 2001);
  DensityOptions o = dopt;
  o.rho_t = r;
  const DensityGrid g = density(mu, t, x, 0, o);
  const auto it = std::max_element(g.values.begin(), g.values.end());
  const std::size_t i = static_cast<std::size_t>(it - g.values.begin());
  if (i == 0 || i + 1 == x.size()) throw Error(ErrorCode::MaxOnBoundary, "density maximum on the grid boundary");
  const DensityEvaluator ev(mu, g, o);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = x[i - 1], b = x[i + 1];
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = ev(c), fd = ev(d);
  double best = std::max({*it, fc, fd});
  double arg = fc > fd ? c : d;
  for (int k = 0; k < 50 && (b - a) * r > 1e-12; ++k) {
    if (fc >= fd) {
      b = d; d = c; fd = fc;
      c = b - gr * (b - a); fc = ev(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + gr * (b - a); fd = ev(d);
    }
    if (std::max(fc, fd) > best) {
      best = std::max(fc, fd);
      arg = fc > fd ? c : d;
    }
  }
  if (best == *it) arg = x[i];
  return {t, r, best, best / r, arg};
}

}  // namespace

BoundCertificate fit_on_diagonal(const LevyMeasure& mu, const std::vector<double>& t_grid, const FitOptions& opts) {
  FitGrid grid;
  grid.t = t_grid;
  grid.half_width = 10.0;
  grid.x_points = 2001;
  check_grid(grid);
  const DensityOptions dopt = density_options(mu, opts);
  BoundCertificate cert;
  cert.id = EstimateId::OnDiag;
  cert.grid = grid;
  cert.spec_hash = mu.hash();
  const FitGrid fine = opts.verify ? refine(grid) : grid;
  double c = std::numeric_limits<double>::infinity(), d = 0.0, cf = c, df = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (double t : fine.t) {
    const bool coarse = std::find(grid.t.begin(), grid.t.end(), t) != grid.t.end();
    const DiagonalRow row = diagonal_max(mu, t, dopt);
    cf = std::min(cf, row.ratio);
    df = std::max(df, row.ratio);
    if (!coarse) continue;
    c = std::min(c, row.ratio);
    d = std::max(d, row.ratio);
    rows.push_back({{"t", row.t}, {"rho", row.rho}, {"max", row.max}, {"ratio", row.ratio}, {"argmax", row.argmax}});
    if (opts.keep_margins) cert.margins.push_back({row.t, row.argmax, row.max, row.ratio * row.rho, 0.0});
  }
  cert.details["rows"] = rows;
  cert.constants["c"] = c;
  cert.constants["d"] = d;
  cert.points = rows.size();
  cert.min_margin = 0.0;
  cert.verdict = c > 0.0 && c <= d && std::isfinite(d) ? Verdict::Pass : Verdict::Fail;
  if (opts.verify) {
    Refinement ref;
    ref.points = fine.t.size();
    ref.constants = {{"c", cf}, {"d", df}};
    ref.max_change = std::abs((df / cf) / (d / c) - 1.0);
    if (ref.max_change >= 0.05) {
      cert.verdict = combine(cert.verdict, Verdict::Marginal);
      cert.caveats.push_back("d/c moved by more than 5% under t-grid refinement");
    }
    cert.refinement = ref;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// I_k

double I_k(const LevyMeasure& mu, double t, int k, double lambda) {
  if (k < 0 || !(lambda > 0.0) || !(t > 0.0)) throw Error(ErrorCode::InvalidParameters, "I_k needs k >= 0, lambda, t > 0");
  const double r = rho(mu, t);
  const auto f = [&](double y) { return std::pow(y, k) * std::exp(-lambda * t * psi_U(mu, y)); };
  // psi^U has kinks at y = 1/|u| for atoms u; split there.
  const auto piece = [&](double a, double b) {
    std::vector<double> pts{a};
    if (mu.atomic() && a > 0.0) {
      for (const Atom& at : mu.atoms_in(1.0 / b, 1.0 / a)) pts.push_back(1.0 / std::abs(at.position));
    }
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (pts[i + 1] > pts[i]) s += numerics::integrate(f, pts[i], pts[i + 1], 1e-10, 1e-300).value;
    }
    return s;
  };
  const double y0 = std::ldexp(r, -40);
  double total = numerics::integrate(f, 0.0, y0, 1e-10, 1e-300).value;
  for (double a = y0; a < r; a *= 2.0) total += piece(a, std::min(2.0 * a, r));
  double a = r;
  for (int i = 0; i < 200; ++i) {
    const double p = piece(a, 2.0 * a);
    total += p;
    a *= 2.0;
    if (p <= 1e-14 * total && f(a) * a <= 1e-14 * total) return 2.0 * total;
  }
  throw Error(ErrorCode::QuadratureFailure, "I_k integrand does not decay");
}

IkDiagnostic I_k_diagnostic(const LevyMeasure& mu, const std::vector<double>& t_grid, int k, double lambda) {
  IkDiagnostic d;
  d.k = k;
  d.lambda = lambda;
  d.inf_ratio = std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    const double r = rho(mu, t);
    const double v = I_k(mu, t, k, lambda);
    const double ratio = v / std::pow(r, k + 1);
    d.rows.push_back({t, r, v, ratio});
    d.sup_ratio = std::max(d.sup_ratio, ratio);
    d.inf_ratio = std::min(d.inf_ratio, ratio);
  }
  return d;
}

}  // namespace levykb
