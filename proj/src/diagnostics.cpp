#include "splitstoch/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <future>

namespace splitstoch {

double eval_phi(const ProblemInstance& problem, const Vector& x) {
  double total = 0.0;
  for (const AgentSpec& agent : problem.agents) {
    const double fv = agent.f_at(x);
    if (fv == kInf) return kInf;
    total += fv + agent.g_at(x);
  }
  return total;
}

double eval_H(const ProblemInstance& problem, const SolverConfig& config,
              const std::vector<Vector>& y, const Vector& x_m) {
  const int users = problem.num_users();
  if (static_cast<int>(y.size()) != users)
    throw DimensionMismatch("eval_H: y must have one block per user");
  const double sigma = config.sigma;
  double total = 0.0;
  for (int i = 0; i < users; ++i) {
    const AgentSpec& user = problem.user(i);
    const Vector& yi = y[static_cast<size_t>(i)];
    const double fv = user.f_at(yi);
    if (fv == kInf) return kInf;
    total += fv;
    if (sigma != 1.0) total += (1.0 - sigma) * user.g_at(yi);
    if (sigma != 0.0) total += sigma * user.g_at(x_m);
  }
  const AgentSpec& server = problem.server();
  const double fm = server.f_at(x_m);
  if (fm == kInf) return kInf;
  return total + fm + server.g_at(x_m);
}

double s_residual(const ProblemInstance& problem, const SolverConfig& config,
                  const OptimalityCertificate& cert) {
  const int users = problem.num_users();
  if (static_cast<int>(cert.z_star.size()) != users)
    throw DimensionMismatch("certificate must have one z block per user");
  const double gamma = config.gamma;
  const double m1 = static_cast<double>(users);
  const Vector& x = cert.x_star;

  Vector acc = Vector::Zero(problem.n);
  for (int i = 0; i < users; ++i) {
    acc += cert.z_star[static_cast<size_t>(i)];
    const AgentSpec& user = problem.user(i);
    if (config.sigma != 0.0 && user.has_grad())
      acc -= (config.sigma * gamma) * user.grad(x);
  }
  if (problem.server().has_grad()) acc -= gamma * problem.server().grad(x);
  const Vector server_fix = problem.server().apply_prox(acc / m1, gamma / m1);
  double residual = (x - server_fix).norm();

  for (int i = 0; i < users; ++i) {
    const AgentSpec& user = problem.user(i);
    Vector arg = 2.0 * x - cert.z_star[static_cast<size_t>(i)];
    if (config.sigma != 1.0 && user.has_grad())
      arg -= ((1.0 - config.sigma) * gamma) * user.grad(x);
    residual += (x - user.apply_prox(arg, gamma)).norm();
  }
  return residual;
}

double lyapunov(const SolverConfig& config, const ParticipationPolicy& policy,
                const IterateState& state, const OptimalityCertificate& cert) {
  const int users = static_cast<int>(state.y.size());
  double total = 0.0;
  for (int i = 0; i < users; ++i) {
    const size_t si = static_cast<size_t>(i);
    const double pi = inclusion_probability(policy, i, users);
    if (!(pi > 0.0)) throw ConfigError("lyapunov: zero inclusion probability");
    total += (config.alpha[si] / pi) * (state.y[si] - cert.x_star).squaredNorm();
    total += (1.0 / (config.lambda[si] * pi)) *
             (state.z[si] - cert.z_star[si]).squaredNorm();
  }
  return total;
}

std::pair<double, double> consensus_metrics(const IterateState& state) {
  const double xn = state.x.norm();
  if (!(xn > 0.0)) return {kInf, kInf};
  double sum_sq = 0.0;
  double max_rel = 0.0;
  for (const Vector& yi : state.y) {
    const double d = (yi - state.x).norm();
    sum_sq += d * d;
    max_rel = std::max(max_rel, d / xn);
  }
  return {sum_sq / (xn * xn), max_rel};
}

OptimalityCertificate make_certificate(const ProblemInstance& problem,
                                       const SolverConfig& config,
                                       const Vector& x_star,
                                       const std::vector<Vector>& user_subgrads) {
  const int users = problem.num_users();
  if (static_cast<int>(user_subgrads.size()) != users)
    throw DimensionMismatch("one subgradient per user required");
  OptimalityCertificate cert;
  cert.x_star = x_star;
  cert.z_star.resize(static_cast<size_t>(users));
  for (int i = 0; i < users; ++i) {
    const size_t si = static_cast<size_t>(i);
    Vector z = x_star - config.gamma * user_subgrads[si];
    const AgentSpec& user = problem.user(i);
    if (config.sigma != 1.0 && user.has_grad())
      z -= ((1.0 - config.sigma) * config.gamma) * user.grad(x_star);
    cert.z_star[si] = std::move(z);
  }
  return cert;
}

std::vector<Vector> l1_subgradient_split(const ProblemInstance& problem,
                                         const Vector& x_star) {
  double total_weight = 0.0;
  for (const AgentSpec& agent : problem.agents) {
    if (agent.kind == ProxKind::l1)
      total_weight += agent.l1_weight;
    else if (agent.kind != ProxKind::zero)
      throw ConfigError("l1_subgradient_split: nonsmooth structure is not l1/zero");
  }
  Vector grad_total = Vector::Zero(problem.n);
  for (const AgentSpec& agent : problem.agents)
    if (agent.has_grad()) grad_total += agent.grad(x_star);

  std::vector<Vector> subgrads;
  subgrads.reserve(static_cast<size_t>(problem.num_users()));
  for (int i = 0; i < problem.num_users(); ++i) {
    const AgentSpec& user = problem.user(i);
    const double w = user.kind == ProxKind::l1 ? user.l1_weight : 0.0;
    if (total_weight > 0.0)
      subgrads.push_back(Vector(-(w / total_weight) * grad_total));
    else
      subgrads.push_back(Vector::Zero(problem.n));
  }
  return subgrads;
}

OptimalityCertificate certificate_from_state(const IterateState& state) {
  return OptimalityCertificate{state.z, state.x};
}

namespace {

struct AggregateL1 {
  double weight = 0.0;     // total l1 weight across agents
  double lipschitz = 0.0;  // sum of gradient moduli
  bool pure = true;        // every nonsmooth term is l1 or zero
};

AggregateL1 aggregate_l1_structure(const ProblemInstance& problem) {
  AggregateL1 agg;
  for (const AgentSpec& agent : problem.agents) {
    if (agent.kind == ProxKind::l1)
      agg.weight += agent.l1_weight;
    else if (agent.kind != ProxKind::zero)
      agg.pure = false;
    agg.lipschitz += agent.lipschitz;
  }
  return agg;
}

Vector total_gradient(const ProblemInstance& problem, const Vector& x) {
  Vector g = Vector::Zero(problem.n);
  for (const AgentSpec& agent : problem.agents)
    if (agent.has_grad()) g += agent.grad(x);
  return g;
}

ReferenceSolution proximal_gradient_reference(const ProblemInstance& problem,
                                              const AggregateL1& agg, double tol) {
  ReferenceSolution ref;
  const long max_iters = 2'000'000;
  Vector x = Vector::Zero(problem.n);
  if (agg.lipschitz <= 0.0) {
    // No smooth part anywhere: the optimum of w*||x||_1 is the origin.
    ref.x_ref = x;
    ref.phi_star = eval_phi(problem, x);
    return ref;
  }
  const double step = 1.0 / agg.lipschitz;
  for (long it = 0; it < max_iters; ++it) {
    Vector forward = x - step * total_gradient(problem, x);
    Vector x_new = agg.weight > 0.0 ? soft_threshold(forward, step * agg.weight)
                                    : std::move(forward);
    const double move = (x_new - x).norm();
    x = std::move(x_new);
    if (move <= tol * step) {
      ref.x_ref = x;
      ref.phi_star = eval_phi(problem, x);
      ref.iterations = it + 1;
      return ref;
    }
  }
  throw NoConvergence("proximal gradient reference did not reach tol=" +
                      std::to_string(tol) + " within " +
                      std::to_string(max_iters) + " iterations");
}

ReferenceSolution grid_reference(const ProblemInstance& problem, double tol) {
  // Staged refinement: scan a coarse lattice on [-5,5]^n, then re-center
  // and shrink until the cell size is below tol.
  const int n = problem.n;
  Vector center = Vector::Zero(n);
  double half = 5.0;
  const int points = 41;  // per axis
  ReferenceSolution ref;
  while (true) {
    double best = kInf;
    Vector best_x = center;
    Vector probe(n);
    const int total = n == 1 ? points : points * points;
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      for (int d = 0; d < n; ++d) {
        const int j = rem % points;
        rem /= points;
        probe[d] = center[d] - half + (2.0 * half) * j / (points - 1);
      }
      const double value = eval_phi(problem, probe);
      if (value < best) {
        best = value;
        best_x = probe;
      }
    }
    center = best_x;
    const double cell = 2.0 * half / (points - 1);
    if (cell <= tol) {
      ref.x_ref = center;
      ref.phi_star = best;
      return ref;
    }
    half = 2.0 * cell;  // keep neighbours of the best cell in view
  }
}

ReferenceSolution splitting_reference(const ProblemInstance& problem, double tol) {
  ReferenceSolution ref;
  SolverConfig config = default_config(problem, /*alpha=*/1.0, /*sigma=*/0.5,
                                       ParticipationPolicy::FixedFraction(1.0),
                                       /*max_iters=*/1, tol * tol, /*seed=*/0);
  config.max_iters = 1;
  RunOptions options;
  options.record_trace = false;
  options.hard_cap_multiplier = 500'000;
  const RunResult result = run(problem, config, std::nullopt, options);
  if (!result.converged)
    throw NoConvergence("full-participation reference did not reach tol^2=" +
                        std::to_string(tol * tol) + " within " +
                        std::to_string(result.state.k) + " iterations");
  ref.x_ref = result.state.x;
  ref.phi_star = eval_phi(problem, ref.x_ref);
  ref.iterations = result.state.k;
  return ref;
}

}  // namespace

ReferenceSolution reference_solve(const ProblemInstance& problem, double tol) {
  if (!(tol > 0.0)) throw ConfigError("reference_solve: tol must be positive");
  const AggregateL1 agg = aggregate_l1_structure(problem);
  if (agg.pure) return proximal_gradient_reference(problem, agg, tol);
  if (problem.n <= 2) return grid_reference(problem, tol);
  return splitting_reference(problem, tol);
}

EpsOptimalityReport eps_optimality(const ProblemInstance& problem,
                                   const SolverConfig& config, int runs,
                                   double eps, double phi_star,
                                   const RunOptions& run_options,
                                   const std::optional<IterateState>& init) {
  if (runs < 2) throw ConfigError("eps_optimality: need at least 2 runs");
  const int users = problem.num_users();

  std::vector<std::future<RunResult>> futures;
  futures.reserve(static_cast<size_t>(runs));
  for (int r = 0; r < runs; ++r) {
    SolverConfig local = config;
    local.seed = derive_run_seed(config.seed, r);
    RunOptions opts = run_options;
    opts.record_trace = false;
    opts.n_threads = 1;
    futures.push_back(std::async(std::launch::async, [&problem, &init, local, opts]() {
      return run(problem, local, init, opts);
    }));
  }

  // Block means across runs: blocks 0..users-1 are y_av_i, block `users`
  // is x_av. Also the mean reformulated objective at the averages.
  std::vector<Vector> mean_blocks(static_cast<size_t>(users) + 1,
                                  Vector::Zero(problem.n));
  double mean_h = 0.0;
  for (auto& fut : futures) {
    const RunResult result = fut.get();
    std::vector<Vector> y_av(static_cast<size_t>(users));
    for (int i = 0; i < users; ++i) {
      y_av[static_cast<size_t>(i)] = result.averages.y_av(i);
      mean_blocks[static_cast<size_t>(i)] += y_av[static_cast<size_t>(i)];
    }
    const Vector x_av = result.averages.x_av();
    mean_blocks[static_cast<size_t>(users)] += x_av;
    mean_h += eval_H(problem, config, y_av, x_av);
  }
  for (Vector& b : mean_blocks) b /= static_cast<double>(runs);
  mean_h /= static_cast<double>(runs);

  EpsOptimalityReport report;
  report.runs = runs;
  report.consensus_margin = 0.0;
  for (size_t a = 0; a < mean_blocks.size(); ++a)
    for (size_t b = a + 1; b < mean_blocks.size(); ++b)
      report.consensus_margin = std::max(
          report.consensus_margin, (mean_blocks[a] - mean_blocks[b]).norm());
  report.objective_margin = std::abs(mean_h - phi_star);
  report.pass =
      report.consensus_margin <= eps && report.objective_margin <= eps;
  return report;
}

}  // namespace splitstoch
