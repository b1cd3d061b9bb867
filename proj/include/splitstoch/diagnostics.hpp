#pragma once

#include "splitstoch/solver.hpp"

#include <functional>

namespace splitstoch {

/// Phi(x) = sum_i f_i(x) + g_i(x); +inf as soon as any f_i(x) = +inf.
double eval_phi(const ProblemInstance& problem, const Vector& x);

/// Objective of the consensus reformulation at user blocks y and server
/// block x_m:
///   sum_{i<m} [ f_i(y_i) + (1-sigma) g_i(y_i) + sigma g_i(x_m) ]
///   + f_m(x_m) + g_m(x_m).
/// Collapses to Phi when every block equals x_m.
double eval_H(const ProblemInstance& problem, const SolverConfig& config,
              const std::vector<Vector>& y, const Vector& x_m);

/// Distance of a certificate from the optimality fixed-point system:
///   || x - prox_{gamma f_m / (m-1)}( mean_i(z_i - sigma gamma grad_i(x))
///                                    - gamma/(m-1) grad_m(x) ) ||
///   + sum_i || x - prox_{gamma f_i}(2x - z_i - (1-sigma) gamma grad_i(x)) ||.
/// Zero (up to rounding) exactly on valid certificates.
double s_residual(const ProblemInstance& problem, const SolverConfig& config,
                  const OptimalityCertificate& cert);

/// Weighted squared distance to the certificate,
///   sum_i [ alpha_i / p_i ||y_i - x*||^2 + 1/(lambda_i p_i) ||z_i - z_i*||^2 ],
/// with p_i taken from the participation policy. With full participation
/// (p_i = 1) this is the quantity that decreases monotonically along
/// deterministic trajectories.
double lyapunov(const SolverConfig& config, const ParticipationPolicy& policy,
                const IterateState& state, const OptimalityCertificate& cert);

/// (stopping_error, consensus_max); both +inf when ||x|| = 0.
std::pair<double, double> consensus_metrics(const IterateState& state);

/// Certificate from the optimality construction: given x* and one
/// subgradient a_i in df_i(x*) per user, sets
///   z_i* = x* - (1-sigma) gamma grad_i(x*) - gamma a_i.
/// The implied server subgradient is determined by stationarity; callers
/// should confirm with s_residual.
OptimalityCertificate make_certificate(const ProblemInstance& problem,
                                       const SolverConfig& config,
                                       const Vector& x_star,
                                       const std::vector<Vector>& user_subgrads);

/// Subgradient split for problems whose nonsmooth terms are all l1 (or
/// absent): a_i = -(w_i / W) * sum_j grad_j(x*), which lies in
/// w_i * d||.||_1(x*) whenever x* is stationary. Throws when some agent
/// has a different nonsmooth structure.
std::vector<Vector> l1_subgradient_split(const ProblemInstance& problem,
                                         const Vector& x_star);

/// Certificate read off a (converged) state: (z, x) as they stand.
OptimalityCertificate certificate_from_state(const IterateState& state);

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReferenceSolution {
  Vector x_ref;
  double phi_star = kInf;
  long iterations = 0;
};

/// Independent high-precision estimate of the optimum.
///  - All nonsmooth terms l1/zero: proximal gradient descent on the
///    aggregate objective with step 1/(sum_i L_i), until the fixed-point
///    residual falls below tol.
///  - n <= 2 with opaque structure: staged dense grid refinement.
///  - Otherwise (e.g. hyperplane constraints): full-participation run of
///    the splitting solver until the stopping error falls below tol^2.
/// Throws NoConvergence when the budget runs out.
ReferenceSolution reference_solve(const ProblemInstance& problem, double tol);

struct EpsOptimalityReport {
  double consensus_margin = kInf;  // max pairwise || mean_r[block_i - block_j] ||
  double objective_margin = kInf;  // | mean_r H(y_av, x_av) - phi_star |
  bool pass = false;
  int runs = 0;
};

/// Estimates the in-expectation optimality margins over R independently
/// seeded runs: block means of the final ergodic averages (the m-th block
/// is x_av) and the mean reformulated objective against phi_star. Runs
/// start from `init` when given, otherwise from zero.
EpsOptimalityReport eps_optimality(
    const ProblemInstance& problem, const SolverConfig& config, int runs,
    double eps, double phi_star, const RunOptions& run_options = {},
    const std::optional<IterateState>& init = std::nullopt);

}  // namespace splitstoch
