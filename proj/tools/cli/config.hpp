#pragma once

#include <gmmpower/simulate.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmmpower::cli {

// Bad configuration or flags; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulateSection {
  SimConfig config;
  std::vector<Eigen::Index> n_grid{100};
  unsigned threads = 0;
  Eigen::Index oracle_size = kDefaultOracleSize;
};

struct PowerSection {
  int df = 1;
  double alpha = 0.05;
  std::vector<Eigen::Index> grid;
  std::optional<double> effect;
  std::optional<double> sigma2;
  // sigma2 taken from the variance column of a fit.json written by `fit`.
  std::optional<std::string> from_fit;
  std::optional<std::string> coefficient;
  // General matrix effect; all four must be present together.
  std::optional<Vector> beta0;
  std::optional<Hypothesis> hypothesis;
  std::optional<Matrix> G0;
  std::optional<Matrix> S0;
  std::vector<NcpConvention> conventions{NcpConvention::Standard};
};

struct FitSection {
  std::optional<std::string> data;
  std::vector<std::string> regressors;
  std::map<std::string, std::string> types;
  // Either a single coefficient test or a full (H, h0).
  std::optional<std::string> test_coefficient;
  double test_value = 0.0;
  std::optional<Hypothesis> hypothesis;
  Method optimizer = Method::BFGS;
  double alpha = 0.05;
};

struct QQSection {
  std::optional<std::string> statistics;
  std::string column = "wald";
  int df = 1;
  double ncp = 0.0;
  std::optional<Eigen::Index> n;
  std::optional<std::string> variant;
};

struct RunConfig {
  SimulateSection simulate;
  PowerSection power;
  FitSection fit;
  QQSection qq;
  std::string output_directory = ".";
};

// Parses a JSON config. Unknown keys and ill-typed values raise ConfigError
// naming the key path, e.g. "simulate.n".
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

}  // namespace gmmpower::cli
