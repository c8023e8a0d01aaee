#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "json.hpp"
#include "levykb/levykb.h"

TEST(CApi, MeasureAndCommand) {
  lkb_measure* m = nullptr;
  ASSERT_EQ(lkb_measure_create("cauchy", &m), LKB_OK);
  double r = 0.0, re = 0.0, im = 0.0;
  EXPECT_EQ(lkb_rho(m, 0.25, &r), LKB_OK);
  EXPECT_NEAR(r, 4.0, 1e-8);
  EXPECT_EQ(lkb_psi(m, 2.0, &re, &im), LKB_OK);
  EXPECT_NEAR(re, 2.0, 1e-10);
  const double x[3] = {-0.1, 0.0, 0.1};
  double p[3];
  EXPECT_EQ(lkb_density(m, 0.1, x, 3, 0, p), LKB_OK);
  EXPECT_NEAR(p[1], 10.0 / std::numbers::pi, 1e-6);
  char hash[17];
  EXPECT_EQ(lkb_measure_hash(m, hash, sizeof hash), LKB_OK);
  EXPECT_EQ(lkb_measure_hash(m, hash, 4), LKB_INVALID_PARAMETERS);
  EXPECT_EQ(lkb_rho(m, -1.0, &r), LKB_INVALID_PARAMETERS);
  EXPECT_STRNE(lkb_last_error(), "");
  lkb_measure_destroy(m);

  lkb_report* rep = nullptr;
  ASSERT_EQ(lkb_run_command("validate", R"({"spec": "dyadic"})", &rep), LKB_OK);
  EXPECT_EQ(lkb_report_verdict(rep), LKB_PASS);
  EXPECT_EQ(lkb_report_exit_code(rep), 0);
  EXPECT_EQ(nlohmann::json::parse(lkb_report_json(rep)).at("verdict"), "PASS");
  lkb_report_destroy(rep);
  EXPECT_EQ(lkb_run_command("validate", "{not json", &rep), LKB_INVALID_PARAMETERS);
  EXPECT_EQ(lkb_measure_create("nope", &m), LKB_INVALID_PARAMETERS);
  EXPECT_STREQ(lkb_status_name(LKB_DELTA_TOO_COARSE), "DeltaTooCoarse");
}
