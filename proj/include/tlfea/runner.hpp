#pragma once

#include "tlfea/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace tlfea {

/// Process exit codes of a run.
enum ExitCode : int {
  kExitOk = 0,
  kExitScenario = 1,
  kExitSolver = 2,
  kExitOutput = 3,
  kExitVerify = 4,
};

struct RunOptions {
  std::filesystem::path out_dir = "out";
  /// Stop after this many output frames instead of the scenario's step count.
  std::optional<std::size_t> frames;
  /// Run the self-check suite before stepping and abort if any check fails.
  bool verify = false;
  /// Progress and verification messages; silent when null.
  std::ostream* log = nullptr;
};

struct RunResult {
  int exit_code = kExitOk;
  std::size_t steps_completed = 0;
  std::size_t frames_written = 0;
  std::string message;
};

/// Executes the time loop and writes energy.csv, probes.csv, contacts.csv, optional VTK snapshots
/// and final_state.csv into opts.out_dir. On a failed step the last accepted state is dumped along
/// with failure.txt and a nonzero exit code is returned.
RunResult run_scenario(const Scenario& scenario, const RunOptions& opts = {});

}  // namespace tlfea
