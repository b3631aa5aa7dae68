#include <gmmpower/error.hpp>
#include <gmmpower/panel.hpp>
#include <gmmpower/simulate.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"

namespace gmmpower {
namespace {

ModelSpec simple_spec(std::vector<Term> terms, CovariateType xtype = CovariateType::TypeII) {
  ModelSpec spec;
  spec.regressors = std::move(terms);
  spec.covariate_types["x"] = xtype;
  return spec;
}

PanelData tiny_panel() {
  PanelData d(2, 2);
  d.add_covariate("x", Matrix{{1.0, 2.0}, {3.0, 4.0}});
  d.set_outcome(Matrix{{0.5, 1.5}, {2.5, 3.5}});
  d.set_pre_sample("x", Vector{{0.7, -0.2}});
  return d;
}

TEST(DesignRow, InterceptAndCovariate) {
  PanelData d(1, 1);
  d.add_covariate("x", Matrix{{2.0}});
  d.set_outcome(Matrix{{0.0}});
  const auto spec = simple_spec({Term::intercept(), Term::series("x")});
  EXPECT_EQ(design_row(d, spec, 0, 1), (Vector{{1.0, 2.0}}));
}

TEST(DesignRow, LagResolvesFromPreSample) {
  PanelData d(1, 2);
  d.add_covariate("x", Matrix{{1.0, 5.0}});
  d.set_outcome(Matrix::Zero(1, 2));
  d.set_pre_sample("x", Vector{{0.7}});
  const auto spec = simple_spec({Term::intercept(), Term::series("x"), Term::lagged("x", 1)});
  EXPECT_EQ(design_row(d, spec, 0, 1), (Vector{{1.0, 1.0, 0.7}}));
  EXPECT_EQ(design_row(d, spec, 0, 2), (Vector{{1.0, 5.0, 1.0}}));
}

TEST(DesignRow, MissingPreSampleNamesTheTerm) {
  PanelData d(1, 2);
  d.add_covariate("x", Matrix{{1.0, 5.0}});
  d.set_outcome(Matrix::Zero(1, 2));
  const auto spec = simple_spec({Term::series("x"), Term::lagged("x", 1)});
  try {
    design_row(d, spec, 0, 1);
    FAIL() << "expected SpecificationError";
  } catch (const SpecificationError& e) {
    EXPECT_NE(std::string(e.what()).find("lag(x,1)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(spec.validate(d), SpecificationError);
}

TEST(DesignRow, SettingTwoRowMatchesGeneratorTrajectory) {
  RngStream rng(99, 0);
  const PanelData d = generate_type3(50, 3, Type3Params{}, rng);
  const ModelSpec spec = setting_model(Setting::Type3);
  for (Eigen::Index i = 0; i < 50; ++i) {
    const Vector row = design_row(d, spec, i, 2);
    ASSERT_EQ(row(0), d.series("x")(i, 1));
    ASSERT_EQ(row(1), d.outcome()(i, 0));
    ASSERT_EQ(design_row(d, spec, i, 1)(1), (*d.pre_sample("y"))(i));
  }
}

TEST(DesignRow, IndependentOfOutcomeForCovariateTerms) {
  const PanelData d = tiny_panel();
  const auto spec = simple_spec({Term::intercept(), Term::series("x"), Term::lagged("x", 1)});
  const PanelData shuffled = d.with_outcome(Matrix{{3.5, 2.5}, {1.5, 0.5}});
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index t = 1; t <= 2; ++t) EXPECT_EQ(design_row(d, spec, i, t), design_row(shuffled, spec, i, t));
}

TEST(MarginalMean, Examples) {
  EXPECT_EQ(marginal_mean(Vector::Zero(3), Vector{{1.0, 2.0, 3.0}}), 0.0);
  EXPECT_EQ(marginal_mean(Vector{{1.0, 2.0}}, Vector{{1.0, 3.0}}), 7.0);
  const Vector beta{{-1.48913, 0.20018, 0.00255, 0.72824, -0.11059, -0.10393}};
  Vector bmi = Vector::Zero(6);
  bmi(3) = 1.0;
  EXPECT_EQ(marginal_mean(beta, bmi), 0.72824);
  EXPECT_THROW(marginal_mean(Vector::Zero(2), Vector::Zero(3)), DimensionMismatch);
}

TEST(Residuals, ExactFitAndZeroBeta) {
  const PanelData d = tiny_panel();
  const auto spec = simple_spec({Term::intercept(), Term::series("x")});
  const Vector beta{{0.25, -1.5}};
  const Matrix x = d.series("x");
  const PanelData exact = d.with_outcome((0.25 - 1.5 * x.array()).matrix());
  EXPECT_LE(residuals(beta, exact, spec).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(residuals(Vector::Zero(2), d, spec), d.outcome());
}

TEST(Residuals, AffineInBeta) {
  RngStream rng(8, 2);
  const PanelData d = generate_type2(30, 3, Type2Params{}, rng);
  const ModelSpec spec = setting_model(Setting::Type2);
  const Matrix design = design_matrix(d, spec);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector b1 = testing::random_vector(rng, 3), b2 = testing::random_vector(rng, 3);
    const Matrix diff = residuals(b1, d, spec) - residuals(b2, d, spec);
    const Vector expected = -design * (b1 - b2);
    for (Eigen::Index i = 0; i < 30; ++i)
      for (Eigen::Index t = 0; t < 3; ++t) ASSERT_NEAR(diff(i, t), expected(i * 3 + t), 1e-12);
  }
}

TEST(Residuals, MeanAtTruthVanishes) {
  // b_i is shared across a subject's T residuals, so the subject means are the
  // independent units: Var(mean) = (T^2 s_b^2 + T s_e^2) / (T^2 n).
  constexpr Eigen::Index n = 10000, T = 3;
  RngStream rng(2718, 0);
  const PanelData d = generate_type2(n, T, Type2Params{}, rng);
  const Matrix u = residuals(setting_true_beta(Setting::Type2, false), d, setting_model(Setting::Type2));
  const double sd_mean = std::sqrt((T * T * 4.0 + T * 1.0) / (T * T * static_cast<double>(n)));
  EXPECT_LE(std::abs(u.mean()), 3.0 * sd_mean);
}

TEST(Term, ParseAndLabel) {
  EXPECT_EQ(Term::parse("intercept").kind, Term::Kind::Intercept);
  const Term lag = Term::parse("lag(y, 1)");
  EXPECT_EQ(lag.kind, Term::Kind::Lag);
  EXPECT_EQ(lag.name, "y");
  EXPECT_EQ(lag.lag, 1);
  EXPECT_EQ(lag.label(), "lag(y,1)");
  EXPECT_EQ(Term::parse("bmi").label(), "bmi");
  EXPECT_THROW(Term::parse("lag(x,0)"), SpecificationError);
  EXPECT_THROW(Term::parse("lag(x)"), SpecificationError);
  EXPECT_THROW(Term::parse(""), SpecificationError);
}

TEST(CovariateType, NamesRoundTrip) {
  for (auto t : {CovariateType::TimeIndependent, CovariateType::TypeI, CovariateType::TypeII, CovariateType::TypeIII,
                 CovariateType::Predetermined})
    EXPECT_EQ(covariate_type_from_string(to_string(t)), t);
  EXPECT_THROW(covariate_type_from_string("TypeIV"), InvalidParameter);
}

TEST(ModelSpec, ValidateChecksHypothesisAndTypes) {
  const PanelData d = tiny_panel();
  auto spec = simple_spec({Term::intercept(), Term::series("x")});
  EXPECT_NO_THROW(spec.validate(d));
  spec.hypothesis = Hypothesis{Matrix{{1.0, 2.0}, {2.0, 4.0}}, Vector::Zero(2)};
  EXPECT_THROW(spec.validate(d), InvalidHypothesis);
  spec.hypothesis = Hypothesis{Matrix{{1.0, 0.0, 0.0}}, Vector::Zero(1)};
  EXPECT_THROW(spec.validate(d), InvalidHypothesis);
  spec.hypothesis = Hypothesis::select(2, 1);
  EXPECT_NO_THROW(spec.validate(d));
  spec.covariate_types.clear();
  EXPECT_THROW(spec.validate(d), SpecificationError);
  auto unknown = simple_spec({Term::series("z")});
  EXPECT_THROW(unknown.validate(d), SpecificationError);
}

TEST(PanelData, RejectsBadShapesAndValues) {
  PanelData d(2, 3);
  EXPECT_THROW(d.add_covariate("x", Matrix::Zero(3, 2)), DimensionMismatch);
  Matrix bad = Matrix::Zero(2, 3);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(d.add_covariate("x", bad), InvalidParameter);
  EXPECT_THROW(d.add_covariate("intercept", Matrix::Zero(2, 3)), InvalidParameter);
  EXPECT_THROW(d.set_pre_sample("x", Vector::Zero(3)), DimensionMismatch);
  EXPECT_THROW(PanelData(0, 3), InvalidParameter);
}

TEST(PanelCsv, RoundTripIsExact) {
  RngStream rng(5, 5);
  const PanelData d = generate_type2(7, 3, Type2Params{}, rng);
  std::stringstream buffer;
  write_panel_csv(buffer, d);
  const PanelData back = read_panel_csv(buffer);
  EXPECT_EQ(back.n_subjects(), 7);
  EXPECT_EQ(back.n_times(), 3);
  EXPECT_EQ(back.outcome(), d.outcome());
  EXPECT_EQ(back.series("x"), d.series("x"));
  ASSERT_NE(back.pre_sample("x"), nullptr);
  EXPECT_EQ(*back.pre_sample("x"), *d.pre_sample("x"));
  EXPECT_EQ(back.pre_sample("y"), nullptr);

  std::stringstream again;
  write_panel_csv(again, back);
  EXPECT_EQ(again.str(), [&] {
    std::stringstream s;
    write_panel_csv(s, d);
    return s.str();
  }());
}

TEST(PanelCsv, ReadsHandWrittenFile) {
  std::istringstream in(
      "subject,time,x,y\n"
      "a,0,0.7,\n"
      "a,1,1,2\n"
      "a,2,2,3\n"
      "b,0,0.1,\n"
      "b,2,4,5\n"
      "b,1,3,4\n");
  const PanelData d = read_panel_csv(in);
  EXPECT_EQ(d.subject_ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.series("x"), (Matrix{{1.0, 2.0}, {3.0, 4.0}}));
  EXPECT_EQ(d.outcome(), (Matrix{{2.0, 3.0}, {4.0, 5.0}}));
  EXPECT_EQ(*d.pre_sample("x"), (Vector{{0.7, 0.1}}));
}

int error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_panel_csv(in);
  } catch (const DataFormatError& e) {
    return static_cast<int>(e.line());
  }
  return -1;
}

TEST(PanelCsv, MalformedInputReportsLine) {
  EXPECT_EQ(error_line("subject,x,time,y\n"), 1);
  EXPECT_EQ(error_line("subject,time,x,y\na,1,1,2\na,2,oops,3\n"), 3);
  EXPECT_EQ(error_line("subject,time,x,y\na,1,1,2\na,1,2,3\n"), 3);
  EXPECT_EQ(error_line("subject,time,x,y\na,1,1,2\na,2,2\n"), 3);
  EXPECT_EQ(error_line("subject,time,x,y\na,1,1,\n"), 2);
  // Unbalanced: subject b lacks time 2.
  EXPECT_GT(error_line("subject,time,x,y\na,1,1,2\na,2,2,3\nb,1,1,1\n"), 0);
  EXPECT_EQ(error_line(""), 0);
}

}  // namespace
}  // namespace gmmpower
