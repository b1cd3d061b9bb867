#pragma once

#include "splitstoch/prox.hpp"
#include "splitstoch/sampling.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitstoch {

using GradFn = std::function<Vector(const Vector&)>;
using ValueFn = std::function<double(const Vector&)>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Structural tag on the nonsmooth term, used by the reference solver and
/// by certificate construction. `custom` means "opaque oracle".
enum class ProxKind { zero, l1, hyperplane, point, custom };

/// One agent's oracles. Empty std::functions encode the trivial member:
/// no prox means f == 0 (prox is the identity), no grad means g == 0.
/// `lipschitz` is the modulus of grad; 0 encodes a constant (or zero)
/// gradient, i.e. infinite cocoercivity.
struct AgentSpec {
  ProxFn prox;
  GradFn grad;
  double lipschitz = 0.0;
  ValueFn f_value;
  ValueFn g_value;

  ProxKind kind = ProxKind::custom;
  double l1_weight = 0.0;  // meaningful when kind == l1

  Vector apply_prox(const Vector& v, double step) const {
    return prox ? prox(v, step) : v;
  }
  Vector apply_grad(const Vector& v) const {
    return grad ? grad(v) : Vector::Zero(v.size());
  }
  double f_at(const Vector& v) const { return f_value ? f_value(v) : 0.0; }
  double g_at(const Vector& v) const { return g_value ? g_value(v) : 0.0; }
  bool has_prox() const { return static_cast<bool>(prox); }
  bool has_grad() const { return static_cast<bool>(grad); }
};

/// The consensus problem: minimize sum_i f_i(x) + g_i(x) over m >= 2
/// agents sharing one n-dimensional variable. The last agent is the
/// server; the others are users.
struct ProblemInstance {
  int n = 0;
  std::vector<AgentSpec> agents;
  std::string name;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int num_users() const { return num_agents() - 1; }
  const AgentSpec& server() const { return agents.back(); }
  const AgentSpec& user(int i) const { return agents.at(static_cast<size_t>(i)); }
};

struct SolverConfig {
  double gamma = 1.0;
  double sigma = 0.5;
  std::vector<double> alpha;   // one per user
  std::vector<double> lambda;  // one per user
  ParticipationPolicy participation = ParticipationPolicy::FixedFraction(1.0);
  long max_iters = 100;   // K; the loop runs while (error > tol or k <= K)
  double tolerance = 1e-10;
  std::uint64_t seed = 0;
  bool record_virtual = false;
};

/// Solver state. y, z, and the two gradient caches have one slot per user.
/// Cache coherence invariant: after construction and after every step,
/// grad_own[i] == grad_i(y[i]) and grad_server[i] == grad_m(y[i]).
struct IterateState {
  long k = 0;
  Vector x;
  std::vector<Vector> y;
  std::vector<Vector> z;
  std::vector<Vector> grad_own;
  std::vector<Vector> grad_server;
};

/// A tuple (z_1*, ..., z_{m-1}*, x*) claimed to satisfy the optimality
/// fixed-point system; verify with s_residual.
struct OptimalityCertificate {
  std::vector<Vector> z_star;
  Vector x_star;
};

struct TraceRecord {
  long k = 0;
  double stopping_error = kInf;  // sum_i ||y_i - x||^2 / ||x||^2, inf when x = 0
  double consensus_max = kInf;   // max_i ||y_i - x|| / ||x||
  double phi = kInf;
  double h_value = kInf;
  std::optional<double> lyapunov;
  long long prox_calls = 0;  // cumulative
  long long grad_calls = 0;  // cumulative
  std::optional<double> elapsed_s;
};

/// Running sums for the ergodic averages x_av = mean of x^{1..K} and
/// y_av_i = mean of y_i^{0..K-1}.
struct ErgodicAverages {
  Vector x_sum;
  std::vector<Vector> y_sum;
  long count = 0;

  static ErgodicAverages zero(int n, int num_users);
  /// Call with y^k before the step, then with x^{k+1} after it; the pair
  /// of calls counts as one accumulated iteration.
  void add_y_prev(const std::vector<Vector>& y_prev);
  void add_x_next(const Vector& x_next);
  Vector x_av() const;
  Vector y_av(int i) const;
};

struct ValidationIssue {
  std::string code;    // e.g. "EmptyParameterWindow"
  int index = -1;      // offending user index, -1 when global
  std::string detail;
};

struct ValidationReport {
  bool ok = false;
  double gamma_max = kInf;              // upper end of the gamma window
  std::vector<double> lambda_max;       // per-user upper end of the lambda window
  std::vector<ValidationIssue> issues;

  std::string summary() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : ConfigError {
  using ConfigError::ConfigError;
};

/// Checks a configuration against the admissible parameter windows:
///   alpha_i >= 0 and alpha_i + floor(1 - sigma) != 0,
///   gamma in (0, min_i { 2 alpha_i / (L_m/(m-1) + sigma L_i),
///                        2 (2+alpha_i) / ((1-sigma) L_i) }),
///   lambda_i in (0, 2 + alpha_i - (1-sigma) gamma L_i / 2),
/// with the convention r/0 = infinity throughout, where L_i is the
/// gradient modulus of agent i and L_m the server's. Returns the computed
/// windows and one issue per violated invariant. Throws DimensionMismatch
/// when the per-user vectors do not match the problem size.
ValidationReport validate_config(const ProblemInstance& problem,
                                 const SolverConfig& config);

/// Throws ConfigError with the report summary when validation fails.
void ensure_valid(const ProblemInstance& problem, const SolverConfig& config);

/// Builds a config from the standard defaults: uniform alpha, gamma at
/// 0.9 of its upper bound (0.25 when the bound is infinite), and
/// lambda_i at 0.9 of its window top. Pass explicit gamma / lambda
/// values to override the automatic choice.
SolverConfig default_config(const ProblemInstance& problem, double alpha,
                            double sigma, ParticipationPolicy participation,
                            long max_iters, double tolerance,
                            std::uint64_t seed,
                            std::optional<double> gamma = std::nullopt,
                            std::optional<double> lambda = std::nullopt);

}  // namespace splitstoch
