#include "splitstoch/solver.hpp"

#include "splitstoch/diagnostics.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace splitstoch {

namespace {

void check_dimensions(const ProblemInstance& problem, const IterateState& state) {
  const size_t users = static_cast<size_t>(problem.num_users());
  if (state.y.size() != users || state.z.size() != users ||
      state.grad_own.size() != users || state.grad_server.size() != users)
    throw DimensionMismatch("iterate state does not match the problem");
}

double mean_alpha(const SolverConfig& config) {
  double s = 0.0;
  for (double a : config.alpha) s += a;
  return s / static_cast<double>(config.alpha.size());
}

bool finite(const Vector& v) { return v.allFinite(); }

// Runs fn(i) for every i in `items`, splitting the list across up to
// n_threads workers. Each call writes only its own slots, so the result
// is identical for any thread count.
void parallel_over(const std::vector<int>& items, int n_threads,
                   const std::function<void(int)>& fn) {
  const int count = static_cast<int>(items.size());
  if (n_threads <= 1 || count < 2) {
    for (int idx : items) fn(idx);
    return;
  }
  const int workers = std::min(n_threads, count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  std::atomic<int> cursor{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int at = cursor.fetch_add(1);
        if (at >= count) return;
        fn(items[static_cast<size_t>(at)]);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

IterateState make_initial_state(const ProblemInstance& problem,
                                OracleCounters* counters) {
  const int users = problem.num_users();
  const Vector zero = Vector::Zero(problem.n);
  return make_initial_state(problem, zero,
                            std::vector<Vector>(static_cast<size_t>(users), zero),
                            std::vector<Vector>(static_cast<size_t>(users), zero),
                            counters);
}

IterateState make_initial_state(const ProblemInstance& problem, const Vector& x0,
                                const std::vector<Vector>& y0,
                                const std::vector<Vector>& z0,
                                OracleCounters* counters) {
  const int users = problem.num_users();
  if (x0.size() != problem.n) throw DimensionMismatch("x0 has wrong dimension");
  if (static_cast<int>(y0.size()) != users || static_cast<int>(z0.size()) != users)
    throw DimensionMismatch("y0/z0 must have one vector per user");

  IterateState state;
  state.k = 0;
  state.x = x0;
  state.y = y0;
  state.z = z0;
  state.grad_own.resize(static_cast<size_t>(users));
  state.grad_server.resize(static_cast<size_t>(users));
  const AgentSpec& server = problem.server();
  for (int i = 0; i < users; ++i) {
    const AgentSpec& user = problem.user(i);
    if (user.has_grad()) {
      state.grad_own[static_cast<size_t>(i)] = user.grad(state.y[static_cast<size_t>(i)]);
      if (counters) ++counters->grad;
    } else {
      state.grad_own[static_cast<size_t>(i)] = Vector::Zero(problem.n);
    }
    if (server.has_grad()) {
      state.grad_server[static_cast<size_t>(i)] = server.grad(state.y[static_cast<size_t>(i)]);
      if (counters) ++counters->grad;
    } else {
      state.grad_server[static_cast<size_t>(i)] = Vector::Zero(problem.n);
    }
  }
  return state;
}

Vector server_update(const ProblemInstance& problem, const SolverConfig& config,
                     const IterateState& state, OracleCounters* counters) {
  check_dimensions(problem, state);
  const int users = problem.num_users();
  const double m1 = static_cast<double>(users);
  const double gamma = config.gamma;

  Vector acc = Vector::Zero(problem.n);
  for (int i = 0; i < users; ++i) {
    const size_t si = static_cast<size_t>(i);
    acc += state.z[si] + config.alpha[si] * state.y[si];
    if (problem.server().has_grad()) acc -= (gamma / m1) * state.grad_server[si];
  }
  if (config.sigma != 0.0) {
    Vector grad_sum = Vector::Zero(problem.n);
    for (int i = 0; i < users; ++i) grad_sum += state.grad_own[static_cast<size_t>(i)];
    acc -= (config.sigma * gamma) * grad_sum;
  }

  ScaledProxRequest req;
  req.base = problem.server().prox;
  req.anchor = acc / m1;
  req.delta = mean_alpha(config);
  req.step = gamma / m1;
  Vector x_next = resolve_scaled_prox(req);
  if (counters && problem.server().has_prox()) ++counters->prox;
  return x_next;
}

std::pair<Vector, Vector> user_update(const ProblemInstance& problem,
                                      const SolverConfig& config,
                                      const IterateState& state,
                                      const Vector& x_next, int i,
                                      OracleCounters* counters) {
  const size_t si = static_cast<size_t>(i);
  const AgentSpec& user = problem.user(i);
  const double a = config.alpha[si];
  const double gamma = config.gamma;

  Vector anchor = (2.0 + a) * x_next - state.z[si];
  // sigma == 1 zeroes the forward term, so the gradient is not evaluated.
  if (user.has_grad() && config.sigma != 1.0) {
    anchor -= ((1.0 - config.sigma) * gamma) * user.grad(x_next);
    if (counters) ++counters->grad;
  }

  ScaledProxRequest req;
  req.base = user.prox;
  req.anchor = std::move(anchor);
  req.delta = a;
  req.step = gamma;
  Vector y_new = resolve_scaled_prox(req);
  if (counters && user.has_prox()) ++counters->prox;

  Vector z_new = state.z[si] + config.lambda[si] * (y_new - x_next);
  return {std::move(y_new), std::move(z_new)};
}

VirtualIterate virtual_update(const ProblemInstance& problem,
                              const SolverConfig& config,
                              const IterateState& state, const Vector& x_next) {
  const int users = problem.num_users();
  VirtualIterate virt;
  virt.y_tilde.resize(static_cast<size_t>(users));
  virt.z_tilde.resize(static_cast<size_t>(users));
  for (int i = 0; i < users; ++i) {
    auto [y_new, z_new] = user_update(problem, config, state, x_next, i, nullptr);
    virt.y_tilde[static_cast<size_t>(i)] = std::move(y_new);
    virt.z_tilde[static_cast<size_t>(i)] = std::move(z_new);
  }
  return virt;
}

double server_implicit_residual(const ProblemInstance& problem,
                                const SolverConfig& config,
                                const IterateState& state, const Vector& x_next) {
  const int users = problem.num_users();
  const double m1 = static_cast<double>(users);
  const double gamma = config.gamma;
  Vector acc = Vector::Zero(problem.n);
  for (int i = 0; i < users; ++i) {
    const size_t si = static_cast<size_t>(i);
    acc += state.z[si] + config.alpha[si] * (state.y[si] - x_next);
    if (problem.server().has_grad()) acc -= (gamma / m1) * state.grad_server[si];
  }
  if (config.sigma != 0.0) {
    for (int i = 0; i < users; ++i)
      acc -= (config.sigma * gamma) * state.grad_own[static_cast<size_t>(i)];
  }
  const Vector rhs = problem.server().apply_prox(acc / m1, gamma / m1);
  return (x_next - rhs).norm();
}

double user_implicit_residual(const ProblemInstance& problem,
                              const SolverConfig& config,
                              const IterateState& state, const Vector& x_next,
                              int i, const Vector& y_new) {
  const size_t si = static_cast<size_t>(i);
  const AgentSpec& user = problem.user(i);
  const double gamma = config.gamma;
  Vector arg = 2.0 * x_next - state.z[si] +
               config.alpha[si] * (x_next - y_new);
  if (user.has_grad() && config.sigma != 1.0)
    arg -= ((1.0 - config.sigma) * gamma) * user.grad(x_next);
  const Vector rhs = user.apply_prox(arg, gamma);
  return (y_new - rhs).norm();
}

TraceRecord step(const ProblemInstance& problem, const SolverConfig& config,
                 IterateState& state, OracleCounters& counters,
                 const StepOptions& options, VirtualIterate* virtual_out) {
  check_dimensions(problem, state);
  const int users = problem.num_users();

  Vector x_next = server_update(problem, config, state, &counters);
  if (!finite(x_next))
    throw SolverError("non-finite server iterate at k=" + std::to_string(state.k) +
                      " (is gamma inside its window?)");

  if (virtual_out) *virtual_out = virtual_update(problem, config, state, x_next);

  const SampleDraw sampled =
      draw(config.participation, users, state.k, config.seed);

  const AgentSpec& server = problem.server();
  std::vector<OracleCounters> local(sampled.members.size());
  std::atomic<bool> bad{false};

  // Sampled users write disjoint slots; order of execution cannot change
  // the result.
  std::vector<int> positions(sampled.members.size());
  for (size_t p = 0; p < sampled.members.size(); ++p) positions[p] = static_cast<int>(p);
  parallel_over(positions, options.n_threads, [&](int p) {
    const int i = sampled.members[static_cast<size_t>(p)];
    const size_t si = static_cast<size_t>(i);
    OracleCounters& mine = local[static_cast<size_t>(p)];
    auto [y_new, z_new] = user_update(problem, config, state, x_next, i, &mine);
    if (!finite(y_new) || !finite(z_new)) {
      bad.store(true);
      return;
    }
    const AgentSpec& user = problem.user(i);
    if (user.has_grad()) {
      state.grad_own[si] = user.grad(y_new);
      ++mine.grad;
    }
    if (server.has_grad()) {
      state.grad_server[si] = server.grad(y_new);
      ++mine.grad;
    }
    state.y[si] = std::move(y_new);
    state.z[si] = std::move(z_new);
  });
  if (bad.load())
    throw SolverError("non-finite user iterate at k=" + std::to_string(state.k) +
                      " (is gamma inside its window?)");

  for (const OracleCounters& c : local) {
    counters.prox += c.prox;
    counters.grad += c.grad;
  }

  state.x = std::move(x_next);
  state.k += 1;

  TraceRecord record;
  record.k = state.k;
  std::tie(record.stopping_error, record.consensus_max) = consensus_metrics(state);
  record.prox_calls = counters.prox;
  record.grad_calls = counters.grad;
  if (options.compute_metrics) {
    record.phi = eval_phi(problem, state.x);
    record.h_value = eval_H(problem, config, state.y, state.x);
  }
  if (options.certificate)
    record.lyapunov =
        lyapunov(config, config.participation, state, *options.certificate);
  return record;
}

RunResult run(const ProblemInstance& problem, const SolverConfig& config,
              std::optional<IterateState> init, const RunOptions& options) {
  ensure_valid(problem, config);

  RunResult result;
  result.state = init ? std::move(*init)
                      : make_initial_state(problem, &result.counters);
  check_dimensions(problem, result.state);
  result.averages = ErgodicAverages::zero(problem.n, problem.num_users());

  StepOptions step_options;
  step_options.certificate = options.certificate;
  step_options.n_threads = options.n_threads;
  step_options.compute_metrics = options.record_trace;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  if (options.record_trace) {
    TraceRecord first;
    first.k = result.state.k;
    std::tie(first.stopping_error, first.consensus_max) =
        consensus_metrics(result.state);
    first.phi = eval_phi(problem, result.state.x);
    first.h_value = eval_H(problem, config, result.state.y, result.state.x);
    first.prox_calls = result.counters.prox;
    first.grad_calls = result.counters.grad;
    if (options.certificate)
      first.lyapunov = lyapunov(config, config.participation, result.state,
                                *options.certificate);
    if (options.measure_time) first.elapsed_s = elapsed();
    result.trace.push_back(std::move(first));
  }

  const long hard_cap =
      std::max(config.max_iters + 1, options.hard_cap_multiplier * config.max_iters);
  double error = 1.0;
  VirtualIterate virt;

  while (error > config.tolerance || result.state.k <= config.max_iters) {
    if (result.state.k >= hard_cap) {
      result.max_iters_exceeded = true;
      break;
    }
    result.averages.add_y_prev(result.state.y);
    TraceRecord record =
        step(problem, config, result.state, result.counters, step_options,
             config.record_virtual ? &virt : nullptr);
    result.averages.add_x_next(result.state.x);
    error = record.stopping_error;
    if (options.record_trace) {
      if (options.measure_time) record.elapsed_s = elapsed();
      result.trace.push_back(std::move(record));
    }
  }
  if (config.record_virtual) result.last_virtual = std::move(virt);
  result.converged = !(error > config.tolerance);
  return result;
}

}  // namespace splitstoch
