#pragma once

#include "splitstoch/types.hpp"

#include <optional>

namespace splitstoch {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invocation counts of user-supplied prox and gradient oracles. Calls to
/// trivial members (empty prox = identity, empty grad = zero) cost nothing
/// and are not counted.
struct OracleCounters {
  long long prox = 0;
  long long grad = 0;
};

/// The updates every user would have computed this iteration, sampled or
/// not. Used by the diagnostics that probe the conditional-expectation
/// identities; never fed back into the solver state.
struct VirtualIterate {
  std::vector<Vector> y_tilde;
  std::vector<Vector> z_tilde;
};

/// Fresh state at the given starting point (zeros by default), with both
/// gradient caches warmed up. The warm-up is the only moment all users'
/// gradients are evaluated at once.
IterateState make_initial_state(const ProblemInstance& problem,
                                OracleCounters* counters = nullptr);
IterateState make_initial_state(const ProblemInstance& problem,
                                const Vector& x0,
                                const std::vector<Vector>& y0,
                                const std::vector<Vector>& z0,
                                OracleCounters* counters = nullptr);

/// x^{k+1}: the server prox applied to the cache-weighted aggregate of
/// (z_i, y_i); the implicit regularization in the aggregate is resolved in
/// closed form through resolve_scaled_prox with delta = mean(alpha).
/// Reads gradients from the state caches only.
Vector server_update(const ProblemInstance& problem, const SolverConfig& config,
                     const IterateState& state,
                     OracleCounters* counters = nullptr);

/// (y_i^{k+1}, z_i^{k+1}) for a sampled user, again via resolve_scaled_prox
/// with delta = alpha_i. Evaluates grad_i at x_next (one gradient call).
std::pair<Vector, Vector> user_update(const ProblemInstance& problem,
                                      const SolverConfig& config,
                                      const IterateState& state,
                                      const Vector& x_next, int i,
                                      OracleCounters* counters = nullptr);

/// Applies the user-update formula to every user without touching state
/// or counters.
VirtualIterate virtual_update(const ProblemInstance& problem,
                              const SolverConfig& config,
                              const IterateState& state, const Vector& x_next);

/// Residual of the implicit fixed-point relation behind the server update,
/// evaluated at a candidate x_next; the closed-form update should satisfy
/// this to within rounding.
double server_implicit_residual(const ProblemInstance& problem,
                                const SolverConfig& config,
                                const IterateState& state,
                                const Vector& x_next);

/// Same for a user's implicit relation at candidate y_new.
double user_implicit_residual(const ProblemInstance& problem,
                              const SolverConfig& config,
                              const IterateState& state, const Vector& x_next,
                              int i, const Vector& y_new);

struct StepOptions {
  const OptimalityCertificate* certificate = nullptr;  // fills TraceRecord::lyapunov
  int n_threads = 1;
  bool compute_metrics = true;  // phi / h_value in the trace record
};

/// One full iteration: server update, participation draw, parallel sampled
/// user updates with cache refresh, carry-over for the rest. Returns the
/// post-step trace record; optionally emits the virtual iterate computed
/// against the same x^{k+1}. Throws SolverError on non-finite iterates.
TraceRecord step(const ProblemInstance& problem, const SolverConfig& config,
                 IterateState& state, OracleCounters& counters,
                 const StepOptions& options = {},
                 VirtualIterate* virtual_out = nullptr);

struct RunOptions {
  const OptimalityCertificate* certificate = nullptr;
  int n_threads = 1;
  bool record_trace = true;
  bool measure_time = false;  // fill TraceRecord::elapsed_s (wall clock)
  long hard_cap_multiplier = 10;  // stop at hard_cap_multiplier * K
};

struct RunResult {
  IterateState state;
  std::vector<TraceRecord> trace;  // k = 0 row first when recording
  ErgodicAverages averages;
  OracleCounters counters;
  bool converged = false;           // stopping error <= tolerance at exit
  bool max_iters_exceeded = false;  // hard cap hit before the error fell
  std::optional<VirtualIterate> last_virtual;
};

/// Runs the loop `while (error > tolerance or k <= K)` from the given
/// state (zeros by default), accumulating the ergodic averages of x^{1..K}
/// and y^{0..K-1}. A hard cap of hard_cap_multiplier * K iterations
/// prevents non-termination when the tolerance is unreachable; hitting it
/// sets max_iters_exceeded and returns the partial trace.
RunResult run(const ProblemInstance& problem, const SolverConfig& config,
              std::optional<IterateState> init = std::nullopt,
              const RunOptions& options = {});

}  // namespace splitstoch
