#include "gmmpower/inference.hpp"

#include <ostream>
#include <string>

#include "gmmpower/csv.hpp"
#include "gmmpower/distributions.hpp"
#include "gmmpower/error.hpp"

namespace gmmpower {
namespace {

void check_hypothesis(const Hypothesis& hyp, Eigen::Index p) {
  if (hyp.H.cols() != p) throw InvalidHypothesis("hypothesis matrix column count does not match the model");
  if (hyp.h0.size() != hyp.H.rows()) throw InvalidHypothesis("h0 length does not match hypothesis rows");
  if (hyp.H.rows() < 1) throw InvalidHypothesis("hypothesis must have at least one row");
  if (null_space(hyp.H).rank != hyp.H.rows()) throw InvalidHypothesis("hypothesis matrix is rank deficient");
}

// d^T [H V H^T]^-1 d
double restriction_quadratic(const Vector& d, const Matrix& H, const Matrix& V) {
  Matrix middle = H * V * H.transpose();
  middle = 0.5 * (middle + middle.transpose());
  try {
    const Vector solved = solve_spd(middle, Matrix(d)).col(0);
    return d.dot(solved);
  } catch (const SingularMatrix& e) {
    throw InvalidHypothesis(std::string("H V H^T is singular: ") + e.what());
  }
}

void check_grid(const std::vector<Eigen::Index>& grid) {
  if (grid.empty()) throw InvalidParameter("sample-size grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) throw InvalidParameter("sample sizes must be positive");
    if (i > 0 && grid[i] <= grid[i - 1]) throw InvalidParameter("sample-size grid must be strictly increasing");
  }
}

TestResult finish(double statistic, int df, double alpha, TestKind kind) {
  TestResult out;
  out.statistic = statistic;
  out.df = df;
  out.alpha = alpha;
  out.kind = kind;
  out.critical_value = chisq_quantile(df, 1.0 - alpha);
  out.reject = statistic >= out.critical_value;
  return out;
}

}  // namespace

std::string_view to_string(NcpConvention c) { return c == NcpConvention::Standard ? "standard" : "half"; }

NcpConvention convention_from_string(std::string_view name) {
  if (name == "standard") return NcpConvention::Standard;
  if (name == "half") return NcpConvention::Half;
  throw InvalidParameter("unknown noncentrality convention '" + std::string(name) + "' (expected standard or half)");
}

TestResult wald_statistic(const GmmFit& unrestricted, const Hypothesis& hyp, Eigen::Index n, double alpha) {
  if (!unrestricted.converged()) throw EstimationFailure("Wald statistic requested for an unconverged fit");
  check_hypothesis(hyp, unrestricted.beta_hat.size());
  if (n < 1) throw InvalidParameter("sample size must be positive");
  const Vector r = hyp.H * unrestricted.beta_hat - hyp.h0;
  const double stat = static_cast<double>(n) * restriction_quadratic(r, hyp.H, unrestricted.V_hat);
  return finish(std::max(stat, 0.0), static_cast<int>(hyp.H.rows()), alpha, TestKind::Wald);
}

TestResult dm_statistic(const GmmFit& restricted, const GmmFit& unrestricted, Eigen::Index n, double alpha) {
  if (!restricted.restricted || unrestricted.restricted)
    throw ProtocolError("dm_statistic expects (restricted, unrestricted) fits in that order");
  if (!restricted.converged() || !unrestricted.converged())
    throw EstimationFailure("DM statistic requested for an unconverged fit");
  if (restricted.S_hat.rows() != unrestricted.S_hat.rows() || restricted.S_hat != unrestricted.S_hat)
    throw ProtocolError("restricted and unrestricted fits used different weighting matrices");
  if (n < 1) throw InvalidParameter("sample size must be positive");
  double diff = restricted.Q_value - unrestricted.Q_value;
  if (diff < 0.0 && diff >= -1e-10) diff = 0.0;
  const int df = restricted.restriction ? static_cast<int>(restricted.restriction->H.rows()) : 1;
  return finish(static_cast<double>(n) * diff, df, alpha, TestKind::DM);
}

double noncentrality_general(const Vector& beta0, const Hypothesis& hyp, const Matrix& G0, const Matrix& S0,
                             Eigen::Index n, NcpConvention convention) {
  check_hypothesis(hyp, beta0.size());
  if (G0.cols() != beta0.size() || G0.rows() != S0.rows()) throw DimensionMismatch("G0/S0 shapes do not match");
  if (n < 1) throw InvalidParameter("sample size must be positive");
  const Vector d = hyp.H * beta0 - hyp.h0;
  if (d.isZero(0.0)) return 0.0;
  Matrix info = G0.transpose() * solve_spd(S0, G0);
  info = 0.5 * (info + info.transpose());
  Matrix V0;
  try {
    V0 = invert_spd(info);
  } catch (const SingularMatrix& e) {
    throw IdentificationError(std::string("population information matrix is singular: ") + e.what());
  }
  const double delta = static_cast<double>(n) * restriction_quadratic(d, hyp.H, V0);
  return convention == NcpConvention::Standard ? delta : 0.5 * delta;
}

double noncentrality_scalar(Eigen::Index n, double beta_alt, double beta_null, double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidParameter("sigma2 must be positive and finite");
  if (n < 1) throw InvalidParameter("sample size must be positive");
  const double d = beta_alt - beta_null;
  return static_cast<double>(n) * d * d / sigma2;
}

double theoretical_power(int df, double ncp, double alpha) { return power_from_ncp({df, ncp, alpha}); }

PowerReport power_curve(const ScalarEffect& effect, const std::vector<Eigen::Index>& grid, double alpha, int df,
                        const std::vector<NcpConvention>& conventions) {
  check_grid(grid);
  PowerReport report;
  for (auto conv : conventions) {
    for (auto n : grid) {
      double ncp = noncentrality_scalar(n, effect.delta, 0.0, effect.sigma2);
      if (conv == NcpConvention::Half) ncp *= 0.5;
      report.rows.push_back({n, ncp, theoretical_power(df, ncp, alpha), conv});
    }
  }
  return report;
}

PowerReport power_curve(const GeneralEffect& effect, const std::vector<Eigen::Index>& grid, double alpha,
                        const std::vector<NcpConvention>& conventions) {
  check_grid(grid);
  const int df = static_cast<int>(effect.hypothesis.H.rows());
  PowerReport report;
  for (auto conv : conventions) {
    for (auto n : grid) {
      const double ncp = noncentrality_general(effect.beta0, effect.hypothesis, effect.G0, effect.S0, n, conv);
      report.rows.push_back({n, ncp, theoretical_power(df, ncp, alpha), conv});
    }
  }
  return report;
}

void write_power_csv(std::ostream& out, const PowerReport& report) {
  out << "n,ncp,power,convention\n";
  for (const auto& row : report.rows)
    out << row.n << ',' << format_double(row.ncp) << ',' << format_double(row.power) << ',' << to_string(row.convention)
        << '\n';
}

}  // namespace gmmpower
