#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levykb/error.hpp"
#include "levykb/measure.hpp"
#include "levykb/numerics.hpp"

using namespace levykb;

TEST(Numerics, IntegratesSmoothAndKinked) {
  EXPECT_NEAR(numerics::integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi).value, 2.0, 1e-12);
  EXPECT_NEAR(numerics::integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-10).value, 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(numerics::integrate([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, 1e-10).value, 0.29, 1e-9);
}

TEST(Numerics, Grids) {
  const auto g = numerics::logspace(1e-3, 1.0, 4);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-3);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  EXPECT_NEAR(g[1], 1e-2, 1e-15);
  const auto l = numerics::linspace(-1.0, 1.0, 5);
  EXPECT_DOUBLE_EQ(l[2], 0.0);
  EXPECT_EQ(numerics::next_pow2(1000), 1024u);
}

TEST(Numerics, PoissonSeriesTail) {
  // sum_{m > 0} 1/m! = e - 1, without the e^{-lambda} factor
  EXPECT_NEAR(numerics::poisson_series_tail(1.0, 0), std::numbers::e - 1.0, 1e-14);
  EXPECT_NEAR(numerics::poisson_series_tail(2.0, 1), std::exp(2.0) - 3.0, 1e-13);
}

TEST(Measures, CauchyTailMassAndSecondMoment) {
  const LevyMeasure mu(preset("cauchy"));
  // m(u) = 1/(pi u^2): mu(|u| > r) = 2/(pi r), int_{|u|<=e} u^2 = 2e/pi.
  for (double r : {1e-3, 0.5, 7.0}) EXPECT_NEAR(mu.tail_mass(r), 2.0 / (std::numbers::pi * r), 1e-12 / r);
  EXPECT_NEAR(mu.second_moment_below(0.25), 0.5 / std::numbers::pi, 1e-13);
  EXPECT_TRUE(mu.symmetric());
  EXPECT_FALSE(mu.atomic());
}

TEST(Measures, MonotoneProxies) {
  for (const char* name : {"cauchy", "dyadic", "oscillating"}) {
    const LevyMeasure mu(preset(name));
    double prev_tail = INFINITY, prev_m2 = 0.0;
    for (double r : numerics::logspace(1e-4, 1e2, 25)) {
      const double tm = mu.tail_mass(r), m2 = mu.second_moment_below(r);
      EXPECT_LE(tm, prev_tail * (1.0 + 1e-12)) << name;
      EXPECT_GE(m2, prev_m2 * (1.0 - 1e-12)) << name;
      EXPECT_GE(tm, 0.0);
      prev_tail = tm;
      prev_m2 = m2;
    }
  }
}

TEST(Measures, DyadicAtoms) {
  const LevyMeasure mu(preset("dyadic"));
  EXPECT_TRUE(mu.atomic());
  const auto atoms = mu.atoms_in(0.2, 1.0);  // 2^-2, 2^-1, 2^0 on both sides
  EXPECT_EQ(atoms.size(), 6u);
  for (const Atom& a : atoms) {
    const double n = -std::log2(std::abs(a.position));
    EXPECT_NEAR(a.weight, std::exp2(n), 1e-12);
  }
}

TEST(Measures, StableNormalization) {
  const LevyMeasure mu(preset("stable", {{"alpha", 1.5}}));
  EXPECT_NEAR(mu.re_psi(2.0), std::pow(2.0, 1.5), 1e-8);
  const LevyMeasure c(preset("cauchy"));
  EXPECT_NEAR(c.re_psi(3.0), 3.0, 1e-10);
  EXPECT_NEAR(c.im_psi(3.0), 0.0, 1e-14);
}

TEST(Measures, SpecJsonRoundTripKeepsHash) {
  for (const char* name : {"cauchy", "stable", "dyadic", "oscillating"}) {
    const LevyMeasureSpec s = preset(name);
    const LevyMeasureSpec back = spec_from_json(spec_to_json(s));
    EXPECT_EQ(LevyMeasure(s).hash(), LevyMeasure(back).hash()) << name;
  }
}

TEST(Measures, ValidateAndErrors) {
  const ValidationReport r = validate(preset("dyadic"));
  EXPECT_TRUE(r.infinite_activity);
  EXPECT_TRUE(r.symmetry_consistent);
  EXPECT_GT(r.mass_sequence.back(), r.mass_sequence.front());
  try {
    (void)preset("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParameters);
  }
  EXPECT_THROW((void)preset("stable", {{"alpha", 2.5}}), Error);
}

TEST(Measures, ConstantModulatorIsPowerLaw) {
  const OscillatingBuild b = build_oscillating_density(1.2, 1.2, Modulator::Constant);
  const double ref = b.table.m.front() * std::pow(b.table.u.front(), 2.2);
  for (std::size_t i = 0; i < b.table.u.size(); i += 50) {
    EXPECT_NEAR(b.table.m[i] * std::pow(b.table.u[i], 2.2) / ref, 1.0, 1e-8);
  }
}
