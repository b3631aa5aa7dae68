#include <gmmpower/error.hpp>
#include <gmmpower/inference.hpp>
#include <gmmpower/simulate.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "test_support.hpp"

namespace gmmpower {
namespace {

struct Fitted {
  MomentSystem ms;
  GmmFit unrestricted;
  GmmFit restricted;
  Hypothesis hyp;
};

Fitted fit_setting(Setting s, Eigen::Index n, std::uint64_t seed, bool null_variant = false) {
  SimConfig cfg;
  cfg.setting = s;
  cfg.n = n;
  cfg.master_seed = seed;
  cfg.null_variant = null_variant;
  const ModelSpec spec = setting_model(s);
  MomentSystem ms(generate_replication(cfg, 0), spec);
  GmmFit u = fit_unrestricted(ms);
  GmmFit r = fit_restricted(ms, *spec.hypothesis, u);
  return {std::move(ms), std::move(u), std::move(r), *spec.hypothesis};
}

TEST(Wald, ZeroWhenRestrictionHoldsExactly) {
  const auto f = fit_setting(Setting::Type2, 200, 1);
  const Hypothesis at_hat = Hypothesis::select(3, 1, f.unrestricted.beta_hat(1));
  const TestResult t = wald_statistic(f.unrestricted, at_hat, 200);
  EXPECT_EQ(t.statistic, 0.0);
  EXPECT_FALSE(t.reject);
  EXPECT_EQ(t.kind, TestKind::Wald);
  EXPECT_EQ(t.df, 1);
}

TEST(Wald, ScalarFormMatchesMatrixForm) {
  const auto f = fit_setting(Setting::Type3, 300, 2);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double h0 = 0.1 * static_cast<double>(j);
    const TestResult t = wald_statistic(f.unrestricted, Hypothesis::select(2, j, h0), 300);
    const double d = f.unrestricted.beta_hat(j) - h0;
    const double scalar = 300.0 * d * d / f.unrestricted.V_hat(j, j);
    EXPECT_NEAR(t.statistic, scalar, 1e-10 * scalar);
  }
}

TEST(Wald, CriticalValueAndRejectConsistency) {
  const auto f = fit_setting(Setting::Type2, 150, 3);
  for (double alpha : {0.01, 0.05, 0.2}) {
    const TestResult t = wald_statistic(f.unrestricted, f.hyp, 150, alpha);
    EXPECT_NEAR(t.critical_value, chisq_quantile(1, 1.0 - alpha), 1e-12);
    EXPECT_EQ(t.reject, t.statistic >= t.critical_value);
    EXPECT_EQ(t.alpha, alpha);
  }
  const Hypothesis joint{Matrix::Identity(3, 3), Vector::Zero(3)};
  EXPECT_EQ(wald_statistic(f.unrestricted, joint, 150).df, 3);
}

TEST(Wald, InvariantUnderRowRescaling) {
  const auto f = fit_setting(Setting::Type2, 250, 4);
  const Hypothesis h{Matrix{{0.0, 1.0, 0.0}, {0.0, 1.0, -1.0}}, Vector{{0.9, 0.1}}};
  Hypothesis scaled = h;
  scaled.H.row(0) *= 7.0;
  scaled.h0(0) *= 7.0;
  scaled.H.row(1) *= 0.01;
  scaled.h0(1) *= 0.01;
  const double a = wald_statistic(f.unrestricted, h, 250).statistic;
  const double b = wald_statistic(f.unrestricted, scaled, 250).statistic;
  EXPECT_NEAR(b, a, 1e-8 * a);
}

TEST(Wald, RejectsBadHypothesisShapes) {
  const auto f = fit_setting(Setting::Type2, 100, 5);
  EXPECT_THROW(wald_statistic(f.unrestricted, Hypothesis::select(2, 0), 100), InvalidHypothesis);
  const Hypothesis dup{Matrix{{0.0, 1.0, 0.0}, {0.0, 2.0, 0.0}}, Vector::Zero(2)};
  EXPECT_THROW(wald_statistic(f.unrestricted, dup, 100), InvalidHypothesis);
}

TEST(Dm, InactiveRestrictionIsNearZero) {
  const auto f = fit_setting(Setting::Type2, 300, 6);
  const GmmFit r = fit_restricted(f.ms, Hypothesis::select(3, 1, f.unrestricted.beta_hat(1)), f.unrestricted);
  const TestResult t = dm_statistic(r, f.unrestricted, 300);
  EXPECT_GE(t.statistic, 0.0);
  EXPECT_LE(t.statistic, 1e-8 * 300);
  EXPECT_EQ(t.kind, TestKind::DM);
}

TEST(Dm, NonNegativeAndPositiveUnderAlternative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = fit_setting(Setting::Type3, 200, 100 + seed, seed % 2 == 0);
    const TestResult t = dm_statistic(f.restricted, f.unrestricted, 200);
    ASSERT_GE(t.statistic, 0.0);
    ASSERT_EQ(t.reject, t.statistic >= t.critical_value);
  }
  const auto alt = fit_setting(Setting::Type3, 500, 7);
  EXPECT_GT(dm_statistic(alt.restricted, alt.unrestricted, 500).statistic, 0.0);
}

TEST(Dm, ProtocolErrors) {
  const auto f = fit_setting(Setting::Type3, 200, 8);
  EXPECT_THROW(dm_statistic(f.unrestricted, f.restricted, 200), ProtocolError);
  GmmFit other = f.restricted;
  other.S_hat(0, 0) += 1.0;
  EXPECT_THROW(dm_statistic(other, f.unrestricted, 200), ProtocolError);
}

TEST(Dm, AsymptoticallyEquivalentToWald) {
  // Both statistics share S-hat and the moments are linear, so their ratio
  // should sit near one on every dataset at this sample size.
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto f = fit_setting(Setting::Type2, 5000, 300 + seed);
    const double w = wald_statistic(f.unrestricted, f.hyp, 5000).statistic;
    const double d = dm_statistic(f.restricted, f.unrestricted, 5000).statistic;
    ratios.push_back(d / w);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 15, ratios.end());
  EXPECT_GE(ratios[15], 0.5);
  EXPECT_LE(ratios[15], 2.0);
}

TEST(Noncentrality, NullIsZeroUnderBothConventions) {
  const Matrix G = -Matrix::Identity(3, 2);
  const Matrix S = Matrix::Identity(3, 3);
  const Vector beta{{0.0, 1.0}};
  for (auto c : {NcpConvention::Standard, NcpConvention::Half})
    EXPECT_EQ(noncentrality_general(beta, Hypothesis::select(2, 0), G, S, 100, c), 0.0);
}

TEST(Noncentrality, LinearInNAndHalfConvention) {
  RngStream rng(9, 0);
  const Matrix G = testing::random_matrix(rng, 5, 3);
  const Matrix S = testing::random_spd(rng, 5);
  const Vector beta{{0.4, -0.2, 1.0}};
  const Hypothesis h{Matrix{{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}}, Vector{{0.0, 0.3}}};
  const double l1 = noncentrality_general(beta, h, G, S, 137);
  EXPECT_EQ(noncentrality_general(beta, h, G, S, 274), 2.0 * l1);
  EXPECT_EQ(noncentrality_general(beta, h, G, S, 137, NcpConvention::Half), 0.5 * l1);
  EXPECT_GT(l1, 0.0);
}

TEST(Noncentrality, ScalarReduction) {
  RngStream rng(10, 0);
  const Matrix G = testing::random_matrix(rng, 4, 2);
  const Matrix S = testing::random_spd(rng, 4);
  const Matrix V = invert_spd(G.transpose() * invert_spd(S) * G);
  const Vector beta{{0.35, 2.0}};
  const double general = noncentrality_general(beta, Hypothesis::select(2, 0, 0.1), G, S, 250);
  const double scalar = noncentrality_scalar(250, 0.35, 0.1, V(0, 0));
  EXPECT_NEAR(general, scalar, 1e-12 * scalar);
}

TEST(NoncentralityScalar, ExamplesAndErrors) {
  EXPECT_EQ(noncentrality_scalar(100, 0.5, 0.5, 2.0), 0.0);
  const double sigma2 = 100.0 / 10.496;
  const double ncp = noncentrality_scalar(100, 1.0, 0.0, sigma2);
  EXPECT_NEAR(ncp, 10.496, 1e-12);
  EXPECT_NEAR(power_from_ncp({1, ncp, 0.05}), 0.900, 0.002);
  EXPECT_THROW(noncentrality_scalar(100, 1.0, 0.0, 0.0), InvalidParameter);
  EXPECT_THROW(noncentrality_scalar(100, 1.0, 0.0, -1.0), InvalidParameter);
}

TEST(TheoreticalPower, Examples) {
  EXPECT_NEAR(theoretical_power(1, 0.0, 0.05), 0.05, 1e-9);
  EXPECT_NEAR(theoretical_power(1, 10.821, 0.05), 0.908, 0.002);
  EXPECT_NEAR(theoretical_power(1, 6.070, 0.05), 0.693, 0.002);
}

TEST(PowerCurve, NullEffectIsAlpha) {
  const auto report = power_curve(ScalarEffect{0.0, 1.0}, {10, 100, 1000}, 0.05, 1);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& row : report.rows) EXPECT_NEAR(row.power, 0.05, 1e-9);
}

TEST(PowerCurve, SubsampleColumn) {
  // Pick sigma2 so that n = 100 gives each target ncp.
  const std::vector<std::pair<double, double>> table = {{5.756, 0.670}, {6.070, 0.693}, {7.296, 0.771}, {7.479, 0.781}};
  for (const auto& [ncp, power] : table) {
    const auto report = power_curve(ScalarEffect{1.0, 100.0 / ncp}, {100}, 0.05, 1);
    EXPECT_NEAR(report.rows[0].ncp, ncp, 1e-12);
    EXPECT_NEAR(report.rows[0].power, power, 0.002);
  }
}

TEST(PowerCurve, MonotoneGridAndBothConventions) {
  const auto report = power_curve(ScalarEffect{0.3, 2.0}, {25, 50, 100, 200}, 0.05, 1,
                                  {NcpConvention::Standard, NcpConvention::Half});
  ASSERT_EQ(report.rows.size(), 8u);
  for (std::size_t k = 1; k < 4; ++k) {
    EXPECT_EQ(report.rows[k].ncp, 2.0 * report.rows[k - 1].ncp);
    EXPECT_GT(report.rows[k].power, report.rows[k - 1].power);
    EXPECT_GT(report.rows[k + 4].power, report.rows[k + 3].power);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(report.rows[k + 4].convention, NcpConvention::Half);
    EXPECT_NEAR(report.rows[k + 4].ncp, 0.5 * report.rows[k].ncp, 1e-14);
  }
}

TEST(PowerCurve, GeneralEffectMonotoneInNAndEffect) {
  RngStream rng(11, 0);
  const Matrix G = testing::random_matrix(rng, 6, 3);
  const Matrix S = testing::random_spd(rng, 6);
  double prev_small = 0.0;
  for (double effect : {0.05, 0.1, 0.2}) {
    const GeneralEffect e{Vector{{effect, 1.0, -1.0}}, Hypothesis::select(3, 0), G, S};
    const auto report = power_curve(e, {20, 40, 80, 160, 320}, 0.05);
    for (std::size_t k = 1; k < report.rows.size(); ++k) EXPECT_GE(report.rows[k].power, report.rows[k - 1].power);
    EXPECT_GT(report.rows[0].power, prev_small);
    prev_small = report.rows[0].power;
  }
}

TEST(PowerCurve, GridValidation) {
  EXPECT_THROW(power_curve(ScalarEffect{}, {}, 0.05, 1), InvalidParameter);
  EXPECT_THROW(power_curve(ScalarEffect{}, {100, 50}, 0.05, 1), InvalidParameter);
  EXPECT_THROW(power_curve(ScalarEffect{}, {0, 50}, 0.05, 1), InvalidParameter);
  EXPECT_THROW(power_curve(ScalarEffect{}, {50, 50}, 0.05, 1), InvalidParameter);
}

TEST(PowerCsv, Format) {
  PowerReport report;
  report.rows.push_back({100, 10.496, 0.9, NcpConvention::Standard});
  report.rows.push_back({100, 5.248, 0.25, NcpConvention::Half});
  std::ostringstream out;
  write_power_csv(out, report);
  EXPECT_EQ(out.str(), "n,ncp,power,convention\n100,10.496,0.9,standard\n100,5.248,0.25,half\n");
}

TEST(NcpConventionNames, RoundTrip) {
  for (auto c : {NcpConvention::Standard, NcpConvention::Half}) EXPECT_EQ(convention_from_string(to_string(c)), c);
  EXPECT_THROW(convention_from_string("quarter"), InvalidParameter);
}

}  // namespace
}  // namespace gmmpower
