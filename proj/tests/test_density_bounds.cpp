#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levykb/bounds.hpp"
#include "levykb/error.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

using namespace levykb;

namespace {
double cauchy(double t, double x) { return t / (std::numbers::pi * (t * t + x * x)); }
}  // namespace

TEST(Density, CauchyClosedForm) {
  const LevyMeasure mu(preset("cauchy"));
  const double t = 0.1;
  const auto x = numerics::linspace(-2.0, 2.0, 101);
  const DensityGrid g = density(mu, t, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g.values[i] / cauchy(t, x[i]), 1.0, 1e-6);
  EXPECT_NEAR(g.rho_t, 10.0, 1e-7);
}

TEST(Density, CauchyDerivative) {
  const LevyMeasure mu(preset("cauchy"));
  const double t = 0.5;
  const auto x = numerics::linspace(-5.0, 5.0, 41);
  const DensityGrid g = density(mu, t, x, 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = -2.0 * t * x[i] / (std::numbers::pi * std::pow(t * t + x[i] * x[i], 2));
    EXPECT_NEAR(g.values[i], d, 1e-6 * std::abs(cauchy(t, 0.0)) / t);
  }
}

TEST(Density, BarDensityHasUnitMassAndInteriorMode) {
  const LevyMeasure mu(preset("dyadic"));
  const double t = 1.0 / 16, r = rho(mu, t);
  const auto x = numerics::linspace(-20.0 / r, 20.0 / r, 4001);
  const DensityGrid g = density_bar(mu, t, x);
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (g.values[i] + g.values[i - 1]) * (x[i] - x[i - 1]);
  EXPECT_NEAR(s, 1.0, 1e-6);
  const double xt = locate_xt(mu, g);
  EXPECT_LT(std::abs(xt), 20.0 / r);
}

TEST(Density, ConvolutionIdentity) {
  const LevyMeasure mu(preset("cauchy"));
  const double t = 1.0 / 16;
  const auto x = numerics::linspace(-10.0 * t, 10.0 * t, 201);
  EXPECT_LE(convolution_check(mu, t, x).relative, 1e-5);
}

TEST(Density, RejectsUnsortedGrid) {
  const LevyMeasure mu(preset("cauchy"));
  EXPECT_THROW((void)density(mu, 0.1, {1.0, 0.0}), Error);
}

TEST(Bounds, KernelShapes) {
  EXPECT_DOUBLE_EQ(kernel_shape(KernelShape::Exponential, 2.0, 1.5), std::exp(-3.0));
  EXPECT_DOUBLE_EQ(kernel_shape(KernelShape::Indicator, 1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(kernel_shape(KernelShape::Indicator, 1.0, 1.5), 0.0);
  EXPECT_NEAR(kernel_shape(KernelShape::ExpLog, 1.0, -2.0), std::exp(-2.0 * std::log(3.0)), 1e-15);
}

TEST(Bounds, VerdictAlgebra) {
  EXPECT_EQ(combine(Verdict::Pass, Verdict::Marginal), Verdict::Marginal);
  EXPECT_EQ(combine(Verdict::Fail, Verdict::Marginal), Verdict::Fail);
  EXPECT_EQ(to_string(Verdict::Pass), "PASS");
}

TEST(Bounds, RefineGrid) {
  FitGrid g;
  g.t = {0.01, 1.0};
  g.x_points = 11;
  const FitGrid f = refine(g);
  ASSERT_EQ(f.t.size(), 3u);
  EXPECT_NEAR(f.t[1], 0.1, 1e-15);
  EXPECT_EQ(f.x_points, 21);
}

TEST(Bounds, TailSpecJson) {
  const TailSpec s = TailSpec::from_json({{"form", "density"}, {"alpha", 1.5}, {"b2", 2.0}});
  EXPECT_EQ(s.form, TailSpec::Form::Density);
  EXPECT_DOUBLE_EQ(TailSpec::from_json(s.to_json()).alpha, 1.5);
  EXPECT_THROW((void)TailSpec::from_json({{"form", "pdf"}}), Error);
}

TEST(Bounds, IkScalesLikeRhoForStable) {
  const LevyMeasure mu(preset("stable"));
  const IkDiagnostic d = I_k_diagnostic(mu, numerics::logspace(1e-3, 1.0, 4), 1, 1.0);
  EXPECT_NEAR(d.sup_ratio / d.inf_ratio, 1.0, 1e-6);
}

TEST(Bounds, OnDiagonalCauchy) {
  const LevyMeasure mu(preset("cauchy"));
  FitOptions o;
  o.verify = false;
  const BoundCertificate c = fit_on_diagonal(mu, {0.01, 0.1, 1.0}, o);
  EXPECT_NEAR(c.constants.at("c"), 1.0 / std::numbers::pi, 1e-6);
  EXPECT_NEAR(c.constants.at("d"), 1.0 / std::numbers::pi, 1e-6);
}

TEST(Bounds, CompoundUpperSmallGrid) {
  const LevyMeasure mu(preset("stable"));
  FitGrid g;
  g.t = {1e-2, 1.0};
  g.x_points = 101;
  g.half_width = 20.0;
  const BoundCertificate c = fit_compound_upper(mu, g);
  EXPECT_NE(c.verdict, Verdict::Fail);
  EXPECT_GT(c.constants.at("b1"), 0.0);
  EXPECT_GE(c.min_margin, 0.0);
}
