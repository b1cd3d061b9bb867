#pragma once

#include "splitstoch/types.hpp"

#include <string>
#include <vector>

namespace splitstoch {

/// Shortest representation that parses back to the same double
/// (std::to_chars); "inf"/"nan" for non-finite values. Used everywhere a
/// number is written to disk so that equal runs produce equal bytes.
std::string format_double(double v);

/// One row per record:
///   k,stopping_error,consensus_max,phi,h_value,lyapunov,prox_calls,grad_calls,elapsed_s
/// `lyapunov` is empty when no certificate was attached, `elapsed_s` is
/// empty unless timing was requested (timestamps would break replay
/// comparisons).
void write_trace_csv(const std::string& path,
                     const std::vector<TraceRecord>& trace);

/// Per-iteration mean and sample standard deviation across runs. Rows are
/// emitted for every k present in at least one run; shorter runs simply
/// stop contributing (n_runs records how many did).
void write_aggregate_csv(const std::string& path,
                         const std::vector<std::vector<TraceRecord>>& runs);

/// Two-column recovered-vs-true signal export.
void write_recovered_csv(const std::string& path, const Vector& x,
                         const Vector& x_true);

}  // namespace splitstoch
