#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace noether::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNoConvergence = 2;
inline constexpr int kExitCheckFailed = 3;

struct CommandOptions {
  std::string command;  ///< solve | check | noether | el | ep | discover
  std::string config;
  std::optional<std::string> extremal;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  /// solve only: write the extremal (or state sequence) as CSV.
  std::optional<std::string> write_extremal;
};

struct CommandResult {
  int exit_code = kExitOk;
  std::string report;  ///< JSON document; empty on usage errors
};

/// Runs one command. Diagnostics go to `err`; the report is returned and not printed.
CommandResult run_command(const CommandOptions& options, std::ostream& err);

/// run_command, then writes the report to `--out` or `out`.
int dispatch(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace noether::cli
