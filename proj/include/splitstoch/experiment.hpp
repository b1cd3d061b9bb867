#pragma once

#include <string>
#include <vector>

namespace splitstoch {

/// Exit codes of the experiment runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitParseError = 2;
inline constexpr int kExitSolverError = 3;

/// Runs one experiment from CLI-style arguments (argv[0] is the program
/// name). Builds the problem, validates and prints the parameter windows,
/// executes the repeated seeded runs (in parallel up to the
/// SPLITSTOCH_THREADS cap), and writes per-run traces, the aggregate
/// curve, a re-feedable config snapshot, and a JSON manifest into the
/// output directory.
int run_experiment(const std::vector<std::string>& args);

}  // namespace splitstoch
