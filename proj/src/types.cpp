#include "splitstoch/types.hpp"

#include <cmath>
#include <sstream>

namespace splitstoch {

ErgodicAverages ErgodicAverages::zero(int n, int num_users) {
  ErgodicAverages av;
  av.x_sum = Vector::Zero(n);
  av.y_sum.assign(static_cast<size_t>(num_users), Vector::Zero(n));
  av.count = 0;
  return av;
}

void ErgodicAverages::add_y_prev(const std::vector<Vector>& y_prev) {
  for (size_t i = 0; i < y_sum.size(); ++i) y_sum[i] += y_prev[i];
}

void ErgodicAverages::add_x_next(const Vector& x_next) {
  x_sum += x_next;
  ++count;
}

Vector ErgodicAverages::x_av() const {
  return count > 0 ? Vector(x_sum / static_cast<double>(count)) : x_sum;
}

Vector ErgodicAverages::y_av(int i) const {
  const Vector& s = y_sum.at(static_cast<size_t>(i));
  return count > 0 ? Vector(s / static_cast<double>(count)) : s;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (ok ? "valid" : "invalid") << "; gamma window (0, " << gamma_max << ")";
  for (const auto& issue : issues) {
    os << "; " << issue.code;
    if (issue.index >= 0) os << "[user " << issue.index << "]";
    os << ": " << issue.detail;
  }
  return os.str();
}

namespace {

// r / d with the r/0 = infinity convention; only used with r >= 0, d >= 0.
double ratio_or_inf(double r, double d) { return d > 0.0 ? r / d : kInf; }

}  // namespace

ValidationReport validate_config(const ProblemInstance& problem,
                                 const SolverConfig& config) {
  const int m = problem.num_agents();
  if (m < 2) throw DimensionMismatch("problem must have at least 2 agents");
  const int users = problem.num_users();
  if (static_cast<int>(config.alpha.size()) != users)
    throw DimensionMismatch("alpha must have one entry per user");
  if (static_cast<int>(config.lambda.size()) != users)
    throw DimensionMismatch("lambda must have one entry per user");
  if (config.participation.mode == ParticipationPolicy::Mode::bernoulli &&
      static_cast<int>(config.participation.p.size()) != users)
    throw DimensionMismatch("bernoulli policy must have one probability per user");

  ValidationReport report;
  report.lambda_max.assign(static_cast<size_t>(users), kInf);

  auto fail = [&](std::string code, int index, std::string detail) {
    report.issues.push_back({std::move(code), index, std::move(detail)});
  };

  if (!(config.sigma >= 0.0 && config.sigma <= 1.0))
    fail("SigmaOutOfRange", -1, "sigma must lie in [0,1]");
  if (config.max_iters < 1) fail("InvalidIterationBudget", -1, "K must be >= 1");
  if (!(config.tolerance > 0.0)) fail("InvalidTolerance", -1, "tolerance must be > 0");

  const double floor_term = std::floor(1.0 - config.sigma);  // 1 iff sigma == 0
  const double L_server = problem.server().lipschitz;

  double gamma_max = kInf;
  for (int i = 0; i < users; ++i) {
    const double a = config.alpha[static_cast<size_t>(i)];
    const double L = problem.user(i).lipschitz;
    if (!(a >= 0.0)) fail("NegativeAlpha", i, "alpha_i must be >= 0");
    if (a + floor_term == 0.0)
      fail("EmptyParameterWindow", i,
           "alpha_i + floor(1 - sigma) = 0: no admissible gamma");
    const double bound1 =
        ratio_or_inf(2.0 * a, L_server / (m - 1) + config.sigma * L);
    const double bound2 = ratio_or_inf(2.0 * (2.0 + a), (1.0 - config.sigma) * L);
    const double bound = std::min(bound1, bound2);
    if (bound == 0.0)
      fail("EmptyParameterWindow", i,
           "gamma window is empty (alpha_i = 0 with a positive denominator)");
    gamma_max = std::min(gamma_max, bound);
  }
  report.gamma_max = gamma_max;

  if (!(config.gamma > 0.0 && config.gamma < gamma_max))
    fail("GammaOutOfWindow", -1,
         "gamma must lie in (0, " + std::to_string(gamma_max) + ")");

  for (int i = 0; i < users; ++i) {
    const double a = config.alpha[static_cast<size_t>(i)];
    const double L = problem.user(i).lipschitz;
    const double top =
        2.0 + a - (1.0 - config.sigma) * config.gamma * L / 2.0;
    report.lambda_max[static_cast<size_t>(i)] = top;
    if (!(top > 0.0))
      fail("EmptyParameterWindow", i, "lambda window is empty");
    const double li = config.lambda[static_cast<size_t>(i)];
    if (!(li > 0.0 && li < top))
      fail("LambdaOutOfWindow", i,
           "lambda_i must lie in (0, " + std::to_string(top) + ")");
  }

  report.ok = report.issues.empty();
  return report;
}

void ensure_valid(const ProblemInstance& problem, const SolverConfig& config) {
  const ValidationReport report = validate_config(problem, config);
  if (!report.ok) throw ConfigError("invalid solver config: " + report.summary());
}

SolverConfig default_config(const ProblemInstance& problem, double alpha,
                            double sigma, ParticipationPolicy participation,
                            long max_iters, double tolerance,
                            std::uint64_t seed, std::optional<double> gamma,
                            std::optional<double> lambda) {
  const int users = problem.num_users();
  SolverConfig config;
  config.sigma = sigma;
  config.alpha.assign(static_cast<size_t>(users), alpha);
  config.lambda.assign(static_cast<size_t>(users), 1.0);
  config.participation = std::move(participation);
  config.max_iters = max_iters;
  config.tolerance = tolerance;
  config.seed = seed;
  config.gamma = 1.0;

  // Probe with a placeholder gamma to learn the window, then settle the
  // actual step sizes. Prox-only problems (infinite window) run fastest
  // with a small step and strong relaxation.
  ValidationReport probe = validate_config(problem, config);
  config.gamma = gamma.value_or(
      std::isfinite(probe.gamma_max) ? 0.9 * probe.gamma_max : 0.25);
  probe = validate_config(problem, config);
  for (int i = 0; i < users; ++i) {
    const double top = probe.lambda_max[static_cast<size_t>(i)];
    config.lambda[static_cast<size_t>(i)] = lambda.value_or(0.9 * top);
  }
  return config;
}

}  // namespace splitstoch
