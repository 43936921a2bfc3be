#pragma once

// Command implementations behind the ipcc executable. Each writes its
// files into out_dir, echoes a human-readable summary to `log`, and
// returns the process exit code: 0 success, 1 invalid input,
// 2 non-convergence or scenario failure.

#include <iosfwd>
#include <string>

#include "ipcc/config.hpp"

namespace ipcc {

int cmd_fit(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err);
int cmd_efficiency(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err);

// Dispatches on cfg.command.
int run_command(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err);

}  // namespace ipcc
