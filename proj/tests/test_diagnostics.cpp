#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splitstoch/diagnostics.hpp"
#include "splitstoch/problems.hpp"

#include <cmath>

using namespace splitstoch;

namespace {

Vector scalar(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

SolverConfig toy_config(const ProblemInstance& problem, double rho = 1.0) {
  return default_config(problem, 1.0, 0.5,
                        ParticipationPolicy::FixedFraction(rho), 100, 1e-12, 3);
}

Vector random_vector(IterationRng& rng, int n, double scale = 2.0) {
  Vector v(n);
  for (int j = 0; j < n; ++j) v[j] = scale * (2.0 * rng.next_double() - 1.0);
  return v;
}

}  // namespace

TEST_CASE("eval_phi on the 1-D toy") {
  const ProblemInstance problem = build_toy1d();
  CHECK(eval_phi(problem, scalar(1.0)) == doctest::Approx(1.5));
  CHECK(eval_phi(problem, scalar(0.0)) == doctest::Approx(2.0));
}

TEST_CASE("eval_H collapses to phi on consensus tuples") {
  const Dataset data = make_synthetic_binary_dataset(24, 4, 2);
  const ProblemInstance problem = build_logistic(data, 4, 1e-3, 1e-2, 2);
  const SolverConfig config = toy_config(problem);
  IterationRng rng(8, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(rng, 4);
    const std::vector<Vector> y(static_cast<size_t>(problem.num_users()), x);
    CHECK(eval_H(problem, config, y, x) ==
          doctest::Approx(eval_phi(problem, x)).epsilon(1e-12));
  }
}

TEST_CASE("eval_H with sigma = 1 reads every gradient block at the server point") {
  const Dataset data = make_synthetic_binary_dataset(24, 4, 6);
  const ProblemInstance problem = build_logistic(data, 3, 1e-3, 1e-2, 6);
  SolverConfig config = toy_config(problem);
  config.sigma = 1.0;

  IterationRng rng(9, 0);
  const Vector x_m = random_vector(rng, 4);
  std::vector<Vector> y;
  for (int i = 0; i < problem.num_users(); ++i) y.push_back(random_vector(rng, 4));

  double direct = 0.0;
  for (int i = 0; i < problem.num_users(); ++i) {
    direct += problem.user(i).f_at(y[static_cast<size_t>(i)]);
    direct += problem.user(i).g_at(x_m);
  }
  direct += problem.server().f_at(x_m) + problem.server().g_at(x_m);
  CHECK(eval_H(problem, config, y, x_m) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("eval_H double-entry re-summation on random tuples") {
  const Dataset data = make_synthetic_binary_dataset(18, 3, 13);
  const ProblemInstance problem = build_logistic(data, 3, 1e-3, 1e-2, 13);
  const SolverConfig config = toy_config(problem);
  IterationRng rng(14, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x_m = random_vector(rng, 3);
    std::vector<Vector> y;
    for (int i = 0; i < problem.num_users(); ++i) y.push_back(random_vector(rng, 3));
    double direct = 0.0;
    for (int i = 0; i < problem.num_users(); ++i) {
      const AgentSpec& user = problem.user(i);
      direct += user.f_at(y[static_cast<size_t>(i)]) +
                (1.0 - config.sigma) * user.g_at(y[static_cast<size_t>(i)]) +
                config.sigma * user.g_at(x_m);
    }
    direct += problem.server().f_at(x_m) + problem.server().g_at(x_m);
    CHECK(eval_H(problem, config, y, x_m) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("s_residual vanishes at the 1-D certificate and flags perturbations") {
  const ProblemInstance problem = build_toy1d();
  const SolverConfig config = toy_config(problem);
  // At x* = 1 the l1 subgradient is 1 and the server gradient is -1, so
  // the stationarity split is a_1 = 1 and z* = x* - gamma * a_1.
  const OptimalityCertificate cert =
      make_certificate(problem, config, scalar(1.0), {scalar(1.0)});
  CHECK(cert.z_star[0][0] == doctest::Approx(1.0 - config.gamma));
  CHECK(s_residual(problem, config, cert) <= 1e-12);

  OptimalityCertificate off = cert;
  off.x_star[0] += 0.1;
  CHECK(s_residual(problem, config, off) > 1e-3);
}

TEST_CASE("s_residual vanishes at the 3-D closed-form certificate") {
  const Vector c = (Vector(3) << 2.0, 0.5, -3.0).finished();
  const ProblemInstance problem = build_l1_quadratic(c);
  const SolverConfig config = toy_config(problem);
  const Vector x_star = soft_threshold(c, 1.0);
  // Stationarity: a_l1 = c - x* lies in the l1 subdifferential; the
  // smooth user and the trivial server contribute zero subgradients.
  const std::vector<Vector> subgrads = {Vector(c - x_star), Vector::Zero(3)};
  const OptimalityCertificate cert =
      make_certificate(problem, config, x_star, subgrads);
  CHECK(s_residual(problem, config, cert) <= 1e-12);
}

TEST_CASE("a converged full-participation run is an approximate certificate") {
  const Vector c = (Vector(3) << 1.5, -0.2, 0.8).finished();
  const ProblemInstance problem = build_l1_quadratic(c);
  SolverConfig config = toy_config(problem);
  config.max_iters = 2000;
  const RunResult result = run(problem, config);
  const OptimalityCertificate cert = certificate_from_state(result.state);
  CHECK(s_residual(problem, config, cert) <= 1e-5);
}

TEST_CASE("lyapunov is zero at the certificate and 2-homogeneous in distance") {
  const ProblemInstance problem = build_toy1d();
  const SolverConfig config = toy_config(problem, 0.5);
  const OptimalityCertificate cert =
      make_certificate(problem, config, scalar(1.0), {scalar(1.0)});

  IterateState at_cert = make_initial_state(problem, cert.x_star, {cert.x_star},
                                            {cert.z_star[0]}, nullptr);
  CHECK(lyapunov(config, config.participation, at_cert, cert) == 0.0);

  IterateState off = at_cert;
  off.y[0] = cert.x_star + scalar(0.3);
  off.z[0] = cert.z_star[0] + scalar(-0.7);
  const double v1 = lyapunov(config, config.participation, off, cert);
  IterateState off2 = at_cert;
  off2.y[0] = cert.x_star + scalar(0.6);
  off2.z[0] = cert.z_star[0] + scalar(-1.4);
  const double v2 = lyapunov(config, config.participation, off2, cert);
  CHECK(v2 == doctest::Approx(4.0 * v1).epsilon(1e-12));

  // Independent re-summation with the defining weights.
  const int users = problem.num_users();
  double direct = 0.0;
  for (int i = 0; i < users; ++i) {
    const double pi = inclusion_probability(config.participation, i, users);
    direct += (config.alpha[static_cast<size_t>(i)] / pi) *
              (off.y[static_cast<size_t>(i)] - cert.x_star).squaredNorm();
    direct += (1.0 / (config.lambda[static_cast<size_t>(i)] * pi)) *
              (off.z[static_cast<size_t>(i)] - cert.z_star[static_cast<size_t>(i)]).squaredNorm();
  }
  CHECK(v1 == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("consensus metrics hand example and conventions") {
  IterateState state;
  state.x = (Vector(2) << 1.0, 0.0).finished();
  state.y = {(Vector(2) << 1.0, 1.0).finished(),
             (Vector(2) << 1.0, -1.0).finished()};
  auto [stopping, max_rel] = consensus_metrics(state);
  CHECK(stopping == doctest::Approx(2.0));
  CHECK(max_rel == doctest::Approx(1.0));

  state.y = {state.x, state.x};
  std::tie(stopping, max_rel) = consensus_metrics(state);
  CHECK(stopping == 0.0);
  CHECK(max_rel == 0.0);

  state.x = Vector::Zero(2);
  std::tie(stopping, max_rel) = consensus_metrics(state);
  CHECK(std::isinf(stopping));
  CHECK(std::isinf(max_rel));
}

TEST_CASE("reference_solve on the toy returns the closed form") {
  const ProblemInstance problem = build_toy1d();
  const ReferenceSolution ref = reference_solve(problem, 1e-12);
  CHECK(ref.x_ref[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ref.phi_star == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("reference_solve grid path handles an opaque 1-D prox problem") {
  ProblemInstance problem;
  problem.n = 1;
  problem.name = "opaque-shift";
  AgentSpec user;
  user.kind = ProxKind::custom;  // forces the grid fallback
  user.prox = [](const Vector& v, double step) {
    Vector out(1);
    out[0] = 3.0 + soft_threshold(v[0] - 3.0, step);
    return out;
  };
  user.f_value = [](const Vector& x) { return std::abs(x[0] - 3.0); };
  problem.agents.push_back(std::move(user));
  AgentSpec server;
  server.kind = ProxKind::zero;
  server.lipschitz = 1.0;
  server.grad = [](const Vector& x) { return Vector(x.array() - 2.0); };
  server.g_value = [](const Vector& x) {
    return 0.5 * (x.array() - 2.0).matrix().squaredNorm();
  };
  problem.agents.push_back(std::move(server));

  // min |x - 3| + (x-2)^2/2: on [2,3] the objective is 3 - x + (x-2)^2/2,
  // decreasing there, and increasing beyond 3, so x* = 3, value 1/2.
  const ReferenceSolution ref = reference_solve(problem, 1e-6);
  CHECK(ref.x_ref[0] == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(ref.phi_star == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("the subgradient-link inequality holds around verified certificates") {
  const Vector c = (Vector(3) << 2.0, 0.5, -3.0).finished();
  const ProblemInstance problem = build_l1_quadratic(c);
  const SolverConfig config = toy_config(problem);
  const Vector x_star = soft_threshold(c, 1.0);
  const OptimalityCertificate cert = make_certificate(
      problem, config, x_star, {Vector(c - x_star), Vector::Zero(3)});
  REQUIRE(s_residual(problem, config, cert) <= 1e-10);
  const double phi_star = eval_phi(problem, x_star);

  IterationRng rng(21, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Vector> blocks;
    for (int i = 0; i < problem.num_users(); ++i)
      blocks.push_back(random_vector(rng, 3, 3.0));
    const Vector x_m = random_vector(rng, 3, 3.0);
    const double lhs = eval_H(problem, config, blocks, x_m) - phi_star;
    // The certificate's subgradient identities lower-bound the objective
    // gap by (1/gamma) sum_i <z_i* - x*, x_m - x_i>.
    double rhs = 0.0;
    for (int i = 0; i < problem.num_users(); ++i)
      rhs += (cert.z_star[static_cast<size_t>(i)] - cert.x_star)
                 .dot(x_m - blocks[static_cast<size_t>(i)]);
    rhs /= config.gamma;
    CHECK(lhs >= rhs - 1e-8);
  }
}

TEST_CASE("eps_optimality at a fixed-point initialization reports zero margins") {
  const ProblemInstance problem = build_toy1d();
  SolverConfig config = toy_config(problem);
  config.max_iters = 50;
  const OptimalityCertificate cert =
      make_certificate(problem, config, scalar(1.0), {scalar(1.0)});
  const IterateState at_cert = make_initial_state(
      problem, cert.x_star, {cert.x_star}, {cert.z_star[0]}, nullptr);

  const EpsOptimalityReport report =
      eps_optimality(problem, config, 4, 1e-9, 1.5, {}, at_cert);
  CHECK(report.pass);
  CHECK(report.consensus_margin <= 1e-10);
  CHECK(report.objective_margin <= 1e-10);
}

TEST_CASE("eps_optimality margins shrink roughly like 1/K on the toy") {
  const ProblemInstance problem = build_toy1d();
  const double phi_star = 1.5;
  double previous = kInf;
  for (long K : {100L, 1000L}) {
    SolverConfig config = default_config(
        problem, 1.0, 0.5, ParticipationPolicy::FixedFraction(1.0), K, 1.0, 17);
    const EpsOptimalityReport report =
        eps_optimality(problem, config, 3, kInf, phi_star, {});
    CHECK(report.objective_margin < previous);
    previous = report.objective_margin;
  }
}
