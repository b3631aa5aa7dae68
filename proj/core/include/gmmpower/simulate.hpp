#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmmpower/distributions.hpp"
#include "gmmpower/gmm.hpp"
#include "gmmpower/inference.hpp"

namespace gmmpower {

enum class Setting { Type2, Type3 };

std::string_view to_string(Setting s);
Setting setting_from_string(std::string_view name);

// y_it = g0 + g1 x_it + g2 x_i,t-1 + b_i + e_it,  x_it = rho x_i,t-1 + eps_it.
struct Type2Params {
  double gamma0 = 0.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double rho = 0.5;
  double sigma_b2 = 4.0;
  double sigma_e2 = 1.0;
  double sigma_eps2 = 1.0;
};

// y_it = beta x_it + kappa y_i,t-1 + u_it,  x_it = gamma y_i,t-1 + v_it.
struct Type3Params {
  double beta = 0.5;
  double kappa = 0.3;
  double gamma = 0.5;
  double sigma_u2 = 1.0;
  double sigma_v2 = 1.0;
};

// x_i0 is drawn from the stationary N(0, s_eps^2 / (1 - rho^2)) and stored as
// the pre-sample value of "x".
PanelData generate_type2(Eigen::Index n, Eigen::Index T, const Type2Params& params, RngStream& stream);
// y_i0 is drawn from the stationary law of y_t = (beta gamma + kappa) y_t-1 +
// beta v_t + u_t and stored as the pre-sample value of "y".
PanelData generate_type3(Eigen::Index n, Eigen::Index T, const Type3Params& params, RngStream& stream);

// Fitted mean model and tested hypothesis (coefficient on x_it = 0) per setting.
ModelSpec setting_model(Setting setting);
Vector setting_true_beta(Setting setting, bool null_variant);

struct SimConfig {
  Setting setting = Setting::Type2;
  Eigen::Index n = 100;
  Eigen::Index T = 3;
  int replications = 500;
  bool null_variant = false;
  Method optimizer = Method::BFGS;
  double alpha = 0.05;
  std::uint64_t master_seed = 20260101;

  void validate() const;
};

PanelData generate_replication(const SimConfig& config, std::uint64_t replication);
RngStream replication_stream(const SimConfig& config, std::uint64_t replication);

// Population-level G0 and S0, evaluated at the data-generating beta on one
// large dataset drawn from a dedicated seed.
struct PopulationOracle {
  Setting setting = Setting::Type2;
  Vector beta_true;
  Hypothesis hypothesis;
  Matrix G0;
  Matrix S0;
  Eigen::Index n_oracle = 0;

  double ncp(Eigen::Index n, NcpConvention convention = NcpConvention::Standard) const;
};

inline constexpr Eigen::Index kDefaultOracleSize = 200000;
inline constexpr std::uint64_t kOracleSeed = 0x0AC1E5EEDULL;

PopulationOracle population_oracle(Setting setting, Eigen::Index n_oracle = kDefaultOracleSize,
                                   Eigen::Index T = 3, std::uint64_t seed = kOracleSeed);

struct ReplicationRecord {
  int replication = 0;
  bool converged = false;
  double wald = 0.0;
  double dm = 0.0;
  bool wald_reject = false;
  bool dm_reject = false;
  Vector beta_hat;
  Vector v_diagonal;
  std::string failure;
};

// Rates are over converged replications. Under a null-variant config they are
// type I error rates; otherwise empirical power.
struct SimReport {
  SimConfig config;
  double wald_rate = 0.0;
  double dm_rate = 0.0;
  double theoretical_power = 0.0;       // standard convention
  double theoretical_power_half = 0.0;  // half convention
  double theoretical_size = 0.0;
  int converged = 0;
  int failed = 0;
  std::vector<ReplicationRecord> records;
};

// More than 20% of replications failed to estimate.
class ExperimentAborted : public EstimationFailure {
 public:
  explicit ExperimentAborted(SimReport report);
  const SimReport& report() const noexcept { return report_; }

 private:
  SimReport report_;
};

struct RunOptions {
  // 0 = std::thread::hardware_concurrency().
  unsigned threads = 0;
  // Reused when present; otherwise computed. Must match the config's setting.
  const PopulationOracle* oracle = nullptr;
};

SimReport run_experiment(const SimConfig& config, const RunOptions& options = {});

// One report row: an alternative run plus a null-variant run.
struct TableRow {
  Setting setting = Setting::Type2;
  Eigen::Index n = 0;
  double theoretical_power = 0.0;
  double theoretical_power_half = 0.0;
  double theoretical_size = 0.0;
  double wald_rejection = 0.0;
  double wald_type1 = 0.0;
  double dm_rejection = 0.0;
  double dm_type1 = 0.0;
  int failed = 0;
};

struct TableRun {
  TableRow row;
  SimReport alternative;
  SimReport null;
};

TableRun run_table_row(const SimConfig& config, const RunOptions& options = {});

// Header "setting,n,theoretical_power,theoretical_size,wald_rejection,wald_type1,dm_rejection,dm_type1,failed".
void write_sim_report_csv(std::ostream& out, const std::vector<TableRow>& rows);
// Per-replication statistics: "setting,n,variant,replication,converged,wald,dm".
void write_statistics_csv(std::ostream& out, const std::vector<const SimReport*>& reports);

struct QQPoint {
  double prob = 0.0;
  double theoretical = 0.0;
  double empirical = 0.0;
};

// Sorted statistics against chi2_df(ncp) quantiles at (i - 0.5) / m.
std::vector<QQPoint> qq_points(std::vector<double> statistics, int df, double ncp);
double qq_correlation(const std::vector<QQPoint>& points);
// Header "prob,theoretical,empirical".
void write_qq_csv(std::ostream& out, const std::vector<QQPoint>& points);

}  // namespace gmmpower
