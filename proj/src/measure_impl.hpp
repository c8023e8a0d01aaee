#pragma once

#include <complex>
#include <vector>

#include "levykb/measure.hpp"

namespace levykb {

class MeasureImpl {
 public:
  virtual ~MeasureImpl() = default;
  virtual bool symmetric() const = 0;
  virtual bool atomic() const = 0;
  virtual double second_moment_below(double eps, bool strict) const = 0;
  virtual double tail_mass(double r, bool inclusive) const = 0;
  virtual double first_moment_band(double lo, double hi) const = 0;
  virtual double re_psi(double xi) const = 0;
  /// Without drift.
  virtual double im_psi(double xi) const = 0;
  virtual std::complex<double> psi_small(double xi, double r) const = 0;
  virtual std::complex<double> lambda_hat(double xi, double r) const = 0;
  virtual std::vector<Atom> atoms_in(double, double) const { return {}; }
  virtual double sample_band(double lo, double hi, double u1, double u2) const = 0;
  virtual double density(double) const { return 0.0; }
};

class PowerLawMeasure final : public MeasureImpl {
 public:
  explicit PowerLawMeasure(const PowerLawParams& p);
  bool symmetric() const override { return true; }
  bool atomic() const override { return false; }
  double second_moment_below(double eps, bool) const override;
  double tail_mass(double r, bool) const override;
  double first_moment_band(double, double) const override { return 0.0; }
  double re_psi(double xi) const override;
  double im_psi(double) const override { return 0.0; }
  std::complex<double> psi_small(double xi, double r) const override;
  std::complex<double> lambda_hat(double xi, double r) const override;
  double sample_band(double lo, double hi, double u1, double u2) const override;
  double density(double u) const override;

  double alpha() const { return alpha_; }
  double c() const { return c_; }

 private:
  double alpha_, c_, k_total_;
};

class DyadicMeasure final : public MeasureImpl {
 public:
  explicit DyadicMeasure(const DyadicAtomsParams& p);
  bool symmetric() const override { return true; }
  bool atomic() const override { return true; }
  double second_moment_below(double eps, bool strict) const override;
  double tail_mass(double r, bool inclusive) const override;
  double first_moment_band(double, double) const override { return 0.0; }
  double re_psi(double xi) const override;
  double im_psi(double) const override { return 0.0; }
  std::complex<double> psi_small(double xi, double r) const override;
  std::complex<double> lambda_hat(double xi, double r) const override;
  std::vector<Atom> atoms_in(double lo, double hi) const override;
  double sample_band(double lo, double hi, double u1, double u2) const override;

  double position(int n) const;
  double weight(int n) const;
  /// Smallest n >= n_min with u_n <= x (strict: u_n < x), equality within 1e-12.
  int first_index_below(double x, bool strict) const;
  int n_min() const { return n_min_; }
  double gamma() const { return gamma_; }
  double upsilon() const { return upsilon_; }

 private:
  // sum_{n >= n0} 2 * 2^{n gamma} (1 - cos(xi u_n))
  double one_minus_cos_from(double xi, int n0) const;
  double gamma_, upsilon_;
  int n_min_;
};

class TabulatedMeasure final : public MeasureImpl {
 public:
  explicit TabulatedMeasure(const TabulatedDensityParams& p);
  bool symmetric() const override { return symmetric_; }
  bool atomic() const override { return false; }
  double second_moment_below(double eps, bool) const override;
  double tail_mass(double r, bool) const override;
  double first_moment_band(double lo, double hi) const override;
  double re_psi(double xi) const override;
  double im_psi(double xi) const override;
  std::complex<double> psi_small(double xi, double r) const override;
  std::complex<double> lambda_hat(double xi, double r) const override;
  double sample_band(double lo, double hi, double u1, double u2) const override;
  double density(double u) const override;

  /// int_a^b u^j m(u) du over the positive half-line, 0 <= a <= b <= inf.
  double moment(int j, double a, double b) const;
  double half_density(double u) const;
  double origin_slope() const { return s_lo_; }
  double tail_slope() const { return s_hi_; }
  double factor() const { return symmetric_ ? 2.0 : 1.0; }

 private:
  enum class Trig { OneMinusCos, Cos, Sin, XMinusSin };
  double segment_moment(int seg, int j, double a, double b) const;
  int segment_of(double u) const;
  double trig_pieces(double xi, double a, double b, Trig kind) const;
  double trig_tail(double xi, double a, Trig kind) const;
  double taylor_one_minus_cos(double xi, double c) const;
  double taylor_x_minus_sin(double xi, double c) const;
  double taylor_sin(double xi, double a, double c) const;

  std::vector<double> u_, m_, s_;
  double s_lo_ = 0.0, s_hi_ = 0.0;
  bool symmetric_ = true;
};

}  // namespace levykb
