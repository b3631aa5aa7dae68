#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace gmmpower::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEstimation = 3;

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_power(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_qq(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Full command line, argv[0] included.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmmpower::cli
