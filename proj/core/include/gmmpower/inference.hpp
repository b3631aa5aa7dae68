#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "gmmpower/gmm.hpp"

namespace gmmpower {

enum class TestKind { Wald, DM };

struct TestResult {
  double statistic = 0.0;
  int df = 1;
  double critical_value = 0.0;
  double alpha = 0.05;
  bool reject = false;
  TestKind kind = TestKind::Wald;
};

// Standard: delta = mu^T A mu. Half: delta / 2.
enum class NcpConvention { Standard, Half };

std::string_view to_string(NcpConvention c);
NcpConvention convention_from_string(std::string_view name);

// n r^T [H V H^T]^-1 r with r = H beta_hat - h0 and V from the fit.
TestResult wald_statistic(const GmmFit& unrestricted, const Hypothesis& hyp, Eigen::Index n, double alpha = 0.05);

// n [Q(beta_tilde) - Q(beta_hat)]. Both fits must share one S-hat.
TestResult dm_statistic(const GmmFit& restricted, const GmmFit& unrestricted, Eigen::Index n, double alpha = 0.05);

double noncentrality_general(const Vector& beta0, const Hypothesis& hyp, const Matrix& G0, const Matrix& S0,
                             Eigen::Index n, NcpConvention convention = NcpConvention::Standard);

// n (beta_alt - beta_null)^2 / sigma2.
double noncentrality_scalar(Eigen::Index n, double beta_alt, double beta_null, double sigma2);

double theoretical_power(int df, double ncp, double alpha);

struct PowerRow {
  Eigen::Index n = 0;
  double ncp = 0.0;
  double power = 0.0;
  NcpConvention convention = NcpConvention::Standard;
};

struct PowerReport {
  std::vector<PowerRow> rows;
};

struct ScalarEffect {
  double delta = 0.0;  // beta_alt - beta_null
  double sigma2 = 1.0;
};

struct GeneralEffect {
  Vector beta0;
  Hypothesis hypothesis;
  Matrix G0;
  Matrix S0;
};

// One row per (convention, n); grid must be non-empty, positive and strictly
// increasing. For a scalar effect df stays as given (normally 1).
PowerReport power_curve(const ScalarEffect& effect, const std::vector<Eigen::Index>& grid, double alpha, int df,
                        const std::vector<NcpConvention>& conventions = {NcpConvention::Standard});
PowerReport power_curve(const GeneralEffect& effect, const std::vector<Eigen::Index>& grid, double alpha,
                        const std::vector<NcpConvention>& conventions = {NcpConvention::Standard});

// Header "n,ncp,power,convention".
void write_power_csv(std::ostream& out, const PowerReport& report);

}  // namespace gmmpower
