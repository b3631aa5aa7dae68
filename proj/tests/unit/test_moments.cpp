#include <gmmpower/error.hpp>
#include <gmmpower/minimize.hpp>
#include <gmmpower/moments.hpp>
#include <gmmpower/simulate.hpp>
#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <set>

#include "test_support.hpp"

namespace gmmpower {
namespace {

std::set<TimePair> brute_force_pairs(int T, bool (*keep)(int, int)) {
  std::set<TimePair> out;
  for (int s = 1; s <= T; ++s)
    for (int t = 1; t <= T; ++t)
      if (keep(s, t)) out.emplace(s, t);
  return out;
}

TEST(ValidPairs, Counts) {
  const auto type1 = valid_pairs(CovariateType::TypeI, 3);
  EXPECT_EQ(type1.size(), 9u);
  EXPECT_EQ(std::set<TimePair>(type1.begin(), type1.end()), brute_force_pairs(3, [](int, int) { return true; }));
  EXPECT_EQ(valid_pairs(CovariateType::TypeII, 3),
            (std::vector<TimePair>{{1, 1}, {2, 1}, {2, 2}, {3, 1}, {3, 2}, {3, 3}}));
  EXPECT_EQ(valid_pairs(CovariateType::TypeIII, 3), (std::vector<TimePair>{{1, 1}, {2, 2}, {3, 3}}));
  EXPECT_EQ(valid_pairs(CovariateType::Predetermined, 3),
            (std::vector<TimePair>{{1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}));
  for (int T = 1; T <= 6; ++T) {
    EXPECT_EQ(valid_pairs(CovariateType::TimeIndependent, T).size(), static_cast<std::size_t>(T * T));
    EXPECT_EQ(valid_pairs(CovariateType::TypeII, T).size(), static_cast<std::size_t>(T * (T + 1) / 2));
    EXPECT_EQ(valid_pairs(CovariateType::TypeIII, T).size(), static_cast<std::size_t>(T));
  }
}

// One subject, one TypeIII regressor x = (1, 2, 3) over three periods.
struct Toy {
  PanelData data{1, 3};
  ModelSpec spec;
  Toy(const Matrix& y) {
    data.add_covariate("x", Matrix{{1.0, 2.0, 3.0}});
    data.set_outcome(y);
    spec.regressors = {Term::series("x")};
    spec.covariate_types["x"] = CovariateType::TypeIII;
  }
};

TEST(SubjectMoments, HandComputed) {
  // beta = 1 leaves U = y - x = (0.5, -0.5, 0).
  Toy toy(Matrix{{1.5, 1.5, 3.0}});
  const MomentSystem ms(toy.data, toy.spec);
  EXPECT_EQ(ms.q(), 3);
  const Vector m = ms.subject_moments(Vector{{1.0}}, 0);
  EXPECT_EQ(m, (Vector{{0.5, -1.0, 0.0}}));
}

TEST(SubjectMoments, ZeroWhenResidualsVanish) {
  Toy toy(Matrix{{2.0, 4.0, 6.0}});
  const MomentSystem ms(toy.data, toy.spec);
  EXPECT_EQ(ms.subject_moments(Vector{{2.0}}, 0), Vector::Zero(3));
}

TEST(Jacobian, HandComputed) {
  Toy toy(Matrix{{0.0, 0.0, 0.0}});
  const MomentSystem ms(toy.data, toy.spec);
  EXPECT_EQ(ms.jacobian(Vector{{0.3}}), (Matrix{{-1.0}, {-4.0}, {-9.0}}));
}

TEST(SampleMoments, SingleSubjectAndPairAverage) {
  Toy toy(Matrix{{1.5, 1.5, 3.0}});
  const MomentSystem ms(toy.data, toy.spec);
  EXPECT_EQ(ms.sample_moments(Vector{{1.0}}), ms.subject_moments(Vector{{1.0}}, 0));

  // Two subjects whose TypeIII moments at beta = 0 are (1, 0) and (0, 1).
  PanelData d(2, 2);
  d.add_covariate("x", Matrix{{1.0, 1.0}, {1.0, 1.0}});
  d.set_outcome(Matrix{{1.0, 0.0}, {0.0, 1.0}});
  ModelSpec spec;
  spec.regressors = {Term::series("x")};
  spec.covariate_types["x"] = CovariateType::TypeIII;
  const MomentSystem two(d, spec);
  EXPECT_EQ(two.sample_moments(Vector::Zero(1)), (Vector{{0.5, 0.5}}));
}

struct SettingData {
  PanelData data;
  ModelSpec spec;
};

SettingData setting_data(Setting s, Eigen::Index n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  PanelData d = s == Setting::Type2 ? generate_type2(n, 3, Type2Params{}, rng) : generate_type3(n, 3, Type3Params{}, rng);
  return {std::move(d), setting_model(s)};
}

TEST(SampleMoments, InvariantUnderPermutationAndDuplication) {
  const auto sd = setting_data(Setting::Type2, 40, 1);
  const MomentSystem ms(sd.data, sd.spec);
  const Vector beta{{0.1, 0.9, 1.2}};
  std::vector<Eigen::Index> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[3], order[17]);
  const MomentSystem perm(sd.data.select_subjects(order), sd.spec);
  EXPECT_LE((perm.sample_moments(beta) - ms.sample_moments(beta)).cwiseAbs().maxCoeff(), 1e-15);

  std::vector<Eigen::Index> doubled;
  for (int rep = 0; rep < 2; ++rep)
    for (Eigen::Index i = 0; i < 40; ++i) doubled.push_back(i);
  const MomentSystem dup(sd.data.select_subjects(doubled), sd.spec);
  EXPECT_LE((dup.sample_moments(beta) - ms.sample_moments(beta)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MomentSystem, NominalCountMatchesPairRules) {
  for (Setting s : {Setting::Type2, Setting::Type3}) {
    const auto sd = setting_data(s, 20, 2);
    Eigen::Index expected = 0;
    for (const auto& term : sd.spec.regressors) expected += valid_pairs(sd.spec.type_of(term), 3).size();
    const MomentSystem raw(sd.data, sd.spec, MomentOptions{.drop_duplicate_moments = false});
    EXPECT_EQ(raw.q(), expected);
    EXPECT_EQ(raw.nominal_q(), expected);
    const MomentSystem ms(sd.data, sd.spec);
    EXPECT_EQ(ms.nominal_q(), expected);
    EXPECT_LE(ms.q(), expected);
    EXPECT_GE(ms.q(), ms.p());
    for (const auto& pr : ms.pairs()) {
      const auto allowed =
          valid_pairs(sd.spec.type_of(sd.spec.regressors[static_cast<std::size_t>(pr.regressor)]), 3);
      EXPECT_NE(std::find(allowed.begin(), allowed.end(), TimePair{pr.s, pr.t}), allowed.end());
    }
  }
}

TEST(MomentSystem, DuplicateInstrumentsCollapse) {
  // Setting 1: the intercept's nine pairs reduce to one per residual time, and
  // lag(x,1) at s repeats x at s-1.
  const auto sd = setting_data(Setting::Type2, 20, 3);
  const MomentSystem ms(sd.data, sd.spec);
  EXPECT_EQ(ms.nominal_q(), 21);
  EXPECT_EQ(ms.q(), 12);
}

TEST(MomentSystem, RejectsUnderIdentifiedModel) {
  // x and z coincide, so after duplicate removal one moment remains for two
  // coefficients.
  PanelData d(5, 1);
  d.add_covariate("x", Matrix::Ones(5, 1));
  d.add_covariate("z", Matrix::Ones(5, 1));
  d.set_outcome(Matrix::Zero(5, 1));
  ModelSpec spec;
  spec.regressors = {Term::series("x"), Term::series("z")};
  spec.covariate_types = {{"x", CovariateType::TypeIII}, {"z", CovariateType::TypeIII}};
  EXPECT_NO_THROW(MomentSystem(d, spec, MomentOptions{.drop_duplicate_moments = false}));
  EXPECT_THROW(MomentSystem(d, spec), SpecificationError);
}

TEST(Jacobian, MatchesFiniteDifferencesAndIsConstant) {
  for (Setting s : {Setting::Type2, Setting::Type3}) {
    const auto sd = setting_data(s, 200, 4);
    const MomentSystem ms(sd.data, sd.spec);
    RngStream rng(40, static_cast<std::uint64_t>(s));
    for (int trial = 0; trial < 10; ++trial) {
      const Vector beta = testing::random_vector(rng, ms.p());
      Matrix fd(ms.q(), ms.p());
      for (Eigen::Index k = 0; k < ms.q(); ++k)
        fd.row(k) = finite_diff_gradient([&](const Vector& b) { return ms.sample_moments(b)(k); }, beta).transpose();
      const Matrix& g = ms.jacobian(beta);
      ASSERT_LE((g - fd).norm() / g.norm(), 1e-6);
      const Vector other = testing::random_vector(rng, ms.p());
      ASSERT_EQ(ms.jacobian(other), g);
    }
  }
}

TEST(WeightTarget, SingleSubjectIsRegularized) {
  const auto sd = setting_data(Setting::Type3, 1, 5);
  const MomentSystem ms(sd.data, sd.spec);
  const Vector beta{{0.2, 0.1}};
  const WeightTarget w = ms.weight_target(beta);
  EXPECT_TRUE(w.regularized);
  EXPECT_TRUE(w.few_subjects);
  const Vector m = ms.subject_moments(beta, 0);
  const Matrix expected = m * m.transpose() + w.ridge * Matrix::Identity(ms.q(), ms.q());
  EXPECT_LE((w.S - expected).cwiseAbs().maxCoeff(), 1e-14 * expected.cwiseAbs().maxCoeff());
  EXPECT_NEAR(w.ridge, 1e-8 * m.squaredNorm() / ms.q(), 1e-20);
}

TEST(WeightTarget, StandardNormalMomentsEstimateIdentity) {
  // With x = 1 and one period per moment, m_i is exactly the residual vector.
  constexpr Eigen::Index n = 10000, q = 4;
  RngStream rng(6, 0);
  PanelData d(n, q);
  d.add_covariate("x", Matrix::Ones(n, q));
  d.set_outcome(testing::random_matrix(rng, n, q));
  ModelSpec spec;
  spec.regressors = {Term::series("x")};
  spec.covariate_types["x"] = CovariateType::TypeIII;
  const MomentSystem ms(d, spec);
  ASSERT_EQ(ms.q(), q);
  const WeightTarget w = ms.weight_target(Vector::Zero(1));
  EXPECT_FALSE(w.regularized);
  EXPECT_LE((w.S - Matrix::Identity(q, q)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(WeightTarget, SymmetricPositiveSemidefinite) {
  const auto sd = setting_data(Setting::Type2, 500, 7);
  const MomentSystem ms(sd.data, sd.spec);
  const WeightTarget w = ms.weight_target(setting_true_beta(Setting::Type2, false));
  EXPECT_LE((w.S - w.S.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(w.S);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

TEST(WeightTarget, AllZeroMomentsAreDegenerate) {
  Toy toy(Matrix{{2.0, 4.0, 6.0}});
  const MomentSystem ms(toy.data, toy.spec);
  EXPECT_THROW(ms.weight_target(Vector{{2.0}}), DegenerateMoments);
}

TEST(SampleMoments, ValidAtTruthWithinMonteCarloBand) {
  constexpr Eigen::Index n = 100000;
  const auto sd = setting_data(Setting::Type2, n, 8);
  const MomentSystem ms(sd.data, sd.spec);
  const Vector beta = setting_true_beta(Setting::Type2, false);
  const Matrix m = ms.moment_matrix(beta);
  const Vector mean = m.colwise().mean();
  for (Eigen::Index k = 0; k < ms.q(); ++k) {
    const double sd_k = std::sqrt((m.col(k).array() - mean(k)).square().sum() / (n - 1));
    EXPECT_LE(std::abs(mean(k)), 3.0 * sd_k / std::sqrt(static_cast<double>(n))) << "moment " << k;
  }
}

TEST(SampleMoments, RootNRate) {
  // Average sup-norm over a few seeds at n = 1e3 and 1e5; nominal ratio 10.
  for (Setting s : {Setting::Type2, Setting::Type3}) {
    const Vector beta = setting_true_beta(s, false);
    double small = 0.0, large = 0.0;
    constexpr int kSeeds = 6;
    for (int seed = 0; seed < kSeeds; ++seed) {
      const auto a = setting_data(s, 1000, 100 + seed);
      const auto b = setting_data(s, 100000, 200 + seed);
      small += MomentSystem(a.data, a.spec).sample_moments(beta).cwiseAbs().maxCoeff();
      large += MomentSystem(b.data, b.spec).sample_moments(beta).cwiseAbs().maxCoeff();
    }
    const double ratio = small / large;
    EXPECT_GE(ratio, 5.0) << to_string(s);
    EXPECT_LE(ratio, 20.0) << to_string(s);
  }
}

}  // namespace
}  // namespace gmmpower
