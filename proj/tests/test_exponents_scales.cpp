#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levykb/decomposition.hpp"
#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/numerics.hpp"
#include "levykb/scales.hpp"

using namespace levykb;

TEST(Exponents, ProxySplitMatchesTailMass) {
  const LevyMeasure mu(preset("cauchy"));
  const double xi = 3.7;
  EXPECT_NEAR(psi_U(mu, xi) - psi_L(mu, xi), 2.0 / std::numbers::pi * xi, 1e-10);
}

TEST(Exponents, SandwichOnPresets) {
  for (const char* name : {"cauchy", "stable", "dyadic"}) {
    const LevyMeasure mu(preset(name));
    for (double xi : numerics::logspace(1e-2, 1e4, 13)) {
      const double re = mu.re_psi(xi);
      EXPECT_LE((1.0 - std::cos(1.0)) * psi_L(mu, xi), re * (1.0 + 1e-10)) << name << " " << xi;
      EXPECT_LE(re, 2.0 * psi_U(mu, xi) * (1.0 + 1e-10)) << name << " " << xi;
    }
  }
}

TEST(Exponents, BetaOfStableIsTwoOverAlpha) {
  for (double a : {0.5, 1.0, 1.5}) {
    const LevyMeasure mu(preset("stable", {{"alpha", a}}));
    const BetaEstimate b = estimate_beta(mu, default_beta_grid());
    EXPECT_NEAR(b.beta_hat, 2.0 / a, 0.005 * 2.0 / a) << a;
  }
}

TEST(Exponents, GrowthFloorOfStable) {
  const LevyMeasure mu(preset("stable", {{"alpha", 1.5}}));
  EXPECT_NEAR(growth_floor(mu, 2.0 / 1.5, default_beta_grid()), 1.0, 1e-6);
}

TEST(Exponents, ProfileIsMirrored) {
  const LevyMeasure mu(preset("stable"));
  const ExponentProfile p = exponent_profile(mu, {0.5, 2.0});
  ASSERT_EQ(p.xi.size(), 5u);
  EXPECT_DOUBLE_EQ(p.xi[2], 0.0);
  EXPECT_NEAR(p.re_psi[0], p.re_psi[4], 1e-14);
}

TEST(Scales, PowerLawRhoIsExact) {
  for (double a : {0.5, 1.0, 1.5}) {
    const LevyMeasure mu(preset("stable", {{"alpha", a}}));
    for (double t : {1e-4, 0.03, 1.0}) EXPECT_NEAR(rho(mu, t) * std::pow(t, 1.0 / a), 1.0, 1e-8) << a << " " << t;
  }
}

TEST(Scales, OrderingAndMonotonicity) {
  for (const char* name : {"cauchy", "dyadic", "oscillating"}) {
    const LevyMeasure mu(preset(name));
    const ScaleTable st = scale_table(mu, numerics::logspace(1e-4, 1.0, 9));
    for (std::size_t i = 0; i < st.t.size(); ++i) {
      EXPECT_LE(st.rho_U[i], st.rho_L[i] * (1.0 + 1e-12)) << name;
      if (i > 0) EXPECT_LE(st.rho[i], st.rho[i - 1] * (1.0 + 1e-12)) << name;
    }
  }
}

TEST(Scales, RejectsBadTime) { EXPECT_THROW((void)rho(LevyMeasure(preset("cauchy")), -1.0), Error); }

TEST(Decomposition, CauchyPoissonRate) {
  const LevyMeasure mu(preset("cauchy"));
  for (double t : {1e-3, 0.1, 1.0}) {
    const Decomposition d = build_decomposition(mu, t);
    EXPECT_NEAR(d.rho_t, 1.0 / t, 1e-8 / t);
    EXPECT_NEAR(d.lambda_total, 2.0 / std::numbers::pi, 1e-8);
  }
}

TEST(Decomposition, PoissonLawConservesMass) {
  const LevyMeasure mu(preset("dyadic"));
  const Decomposition d = build_decomposition(mu, 1.0 / 16);
  PoissonOptions o;
  o.tol = 1e-14;
  o.window = 10.0 * d.radius;
  const PoissonLaw law = poisson_law(d, poisson_m_max(d.lambda_total, 1e-15), o);
  EXPECT_NEAR(law.delta0, std::exp(-d.lambda_total), 1e-15);
  double s = law.tail_bound;
  for (double w : law.term_mass) s += w;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Decomposition, CharacteristicFunctionFactorizes) {
  const LevyMeasure mu(preset("stable"));
  const double t = 0.05;
  const Decomposition d = build_decomposition(mu, t);
  for (double f : {0.1, 1.0, 3.0}) {
    const double xi = f * d.rho_t;
    const auto lhs = std::exp(-t * mu.psi(xi));
    const auto rhs = std::exp(-psi_t(d, xi)) * poisson_cf(d, xi) * std::polar(1.0, -xi * d.a_t);
    EXPECT_LT(std::abs(lhs - rhs), 1e-8 * std::abs(lhs));
  }
}

TEST(Exponents, DyadicPsiLIsStrictAtAtoms) {
  const LevyMeasure mu(preset("dyadic"));
  // Atom at 1/8 sits on |xi u| = 1 and is excluded from psi^L(8).
  EXPECT_NEAR(psi_L(mu, 8.0), 16.0, 1e-12);
  EXPECT_NEAR(64.0 * mu.second_moment_below(0.125, false), 32.0, 1e-12);
}
