#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "levykb/error.hpp"
#include "levykb/harness.hpp"
#include "levykb/montecarlo.hpp"
#include "levykb/numerics.hpp"

using namespace levykb;

TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(Philox::block({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducible) {
  Philox a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 10; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(Philox(7, 3)(), c());
}

TEST(MonteCarlo, CauchySamplesMatchClosedForm) {
  const LevyMeasure mu(preset("cauchy"));
  SamplerConfig sc;
  sc.n_samples = 20000;
  sc.seed = 99;
  const SampleRun run = sample_increments(mu, 0.1, sc);
  ASSERT_EQ(run.samples.size(), 20000u);
  auto s = run.samples;
  std::sort(s.begin(), s.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = 0.5 + std::atan(s[i] / 0.1) / std::numbers::pi;
    ks = std::max({ks, (i + 1.0) / s.size() - F, F - static_cast<double>(i) / s.size()});
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(20000.0));
  // Same seed, same draws, independent of thread count.
  sc.threads = 1;
  EXPECT_EQ(sample_increments(mu, 0.1, sc).samples, run.samples);
}

TEST(MonteCarlo, BinaryRoundTrip) {
  const LevyMeasure mu(preset("stable"));
  SamplerConfig sc;
  sc.n_samples = 100;
  sc.seed = 5;
  const SampleRun run = sample_increments(mu, 0.2, sc);
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_samples(run, ss);
  const SampleRun back = read_samples(ss);
  EXPECT_EQ(back.samples, run.samples);
  EXPECT_EQ(back.config.seed, 5u);
  EXPECT_DOUBLE_EQ(back.t, 0.2);
}

TEST(MonteCarlo, TwoSampleKs) {
  EXPECT_DOUBLE_EQ(ks_two_sample({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(ks_two_sample({1, 2}, {3, 4}), 1.0);
}

TEST(MonteCarlo, CoarseDeltaRejected) {
  const LevyMeasure mu(preset("cauchy"));
  SamplerConfig sc;
  sc.n_samples = 10;
  sc.delta = 10.0;  // above 1/rho_t
  EXPECT_THROW((void)sample_increments(mu, 0.1, sc), Error);
}

TEST(Harness, LogGrid) {
  const auto g = parse_log_grid("1e-3:1:4");
  ASSERT_EQ(g.size(), 4u);
  EXPECT_NEAR(g[2], 0.1, 1e-15);
  EXPECT_EQ(parse_log_grid("0.5").size(), 1u);
  EXPECT_THROW((void)parse_log_grid("1:0.1:3"), Error);
  EXPECT_THROW((void)parse_log_grid("a:b"), Error);
}

TEST(Harness, ConfigRoundTripAndChecks) {
  RunConfig c = config_from_json({{"spec", "dyadic"}, {"t_grid", "1e-3:1:5"}, {"k", {0, 1}}, {"seed", 3}});
  EXPECT_EQ(effective_t_grid(c).size(), 5u);
  const RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.k, c.k);
  EXPECT_EQ(back.seed, 3u);
  c.t_grid = {2.0};
  EXPECT_THROW(check_config(c), Error);
  EXPECT_EQ(effective_t_grid(RunConfig{}).size(), 25u);
}

TEST(Harness, ExitCodes) {
  EXPECT_EQ(exit_code(Verdict::Pass), 0);
  EXPECT_EQ(exit_code(Verdict::Marginal), 2);
  EXPECT_EQ(exit_code(Verdict::Fail), 1);
}

TEST(Harness, CommandsWriteManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "levykb_unit_out";
  std::filesystem::remove_all(dir);
  RunConfig c;
  c.spec = "cauchy";
  c.t_grid = {1e-2, 1.0};
  c.out_dir = dir.string();
  const CommandReport r = run_command("scales", c);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "scales.csv"));
  std::ifstream is(dir / "manifest.json");
  const auto m = nlohmann::json::parse(is);
  // Idempotent: same config, same hash.
  EXPECT_EQ(m.at("config_hash"), run_command("scales", c).report.at("manifest").at("config_hash"));
  EXPECT_THROW((void)run_command("frobnicate", c), Error);
  std::filesystem::remove_all(dir);
}

TEST(Harness, InvariantsOnStable) {
  InvariantOptions o;
  o.t_grid = {1e-3, 1.0};
  for (const auto& r : run_invariants(LevyMeasure(preset("stable")), o)) EXPECT_TRUE(r.pass) << r.name << " " << r.detail;
}
