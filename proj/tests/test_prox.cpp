#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splitstoch/prox.hpp"
#include "splitstoch/sampling.hpp"

#include <cmath>

using namespace splitstoch;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double x : values) v[j++] = x;
  return v;
}

double kInf_test() { return std::numeric_limits<double>::infinity(); }

// Brute-force 1-D prox: minimizes tau*|y| + 0.5*(y - v)^2 on a grid.
double grid_prox_abs(double v, double tau, double lo, double hi, double step) {
  double best_y = lo, best_obj = kInf_test();
  for (double y = lo; y <= hi; y += step) {
    const double obj = tau * std::abs(y) + 0.5 * (y - v) * (y - v);
    if (obj < best_obj) {
      best_obj = obj;
      best_y = y;
    }
  }
  return best_y;
}

// Golden-section minimum of a convex 1-D function on [lo, hi].
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 200) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  for (int it = 0; it < iters; ++it) {
    if (f(c) < f(d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return 0.5 * (a + b);
}

Vector random_vector(IterationRng& rng, int n, double scale = 3.0) {
  Vector v(n);
  for (int j = 0; j < n; ++j) v[j] = scale * (2.0 * rng.next_double() - 1.0);
  return v;
}

}  // namespace

TEST_CASE("soft_threshold closed form") {
  CHECK(soft_threshold(3.0, 1.0) == doctest::Approx(2.0));
  const Vector dead = soft_threshold(vec({0.5, -0.5}), 1.0);
  CHECK(dead[0] == 0.0);
  CHECK(dead[1] == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == doctest::Approx(-2.0));
}

TEST_CASE("soft_threshold matches the grid oracle") {
  const double oracle = grid_prox_abs(3.0, 1.0, -5.0, 5.0, 1e-4);
  CHECK(std::abs(soft_threshold(3.0, 1.0) - oracle) <= 1e-4);

  IterationRng rng(2024, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const double v = 8.0 * (2.0 * rng.next_double() - 1.0);
    const double tau = 0.1 + 2.0 * rng.next_double();
    const double oracle_y = grid_prox_abs(v, tau, -10.0, 10.0, 1e-4);
    CHECK(std::abs(soft_threshold(v, tau) - oracle_y) <= 2e-4);
  }
}

TEST_CASE("project_hyperplane closed form") {
  const Vector r1 = project_hyperplane(vec({1, 1}), 2.0, vec({0, 0}));
  CHECK(r1[0] == doctest::Approx(1.0));
  CHECK(r1[1] == doctest::Approx(1.0));

  const Vector r2 = project_hyperplane(vec({1, 0}), 5.0, vec({3, 7}));
  CHECK(r2[0] == doctest::Approx(5.0));
  CHECK(r2[1] == doctest::Approx(7.0));

  CHECK_THROWS_AS(project_hyperplane(vec({0, 0}), 1.0, vec({1, 1})),
                  std::invalid_argument);
}

TEST_CASE("project_hyperplane matches a grid search along the plane") {
  // Points on {x1 + 2 x2 = 3} are (3 - 2t, t); minimize distance to origin.
  double best_t = 0.0, best = kInf_test();
  for (double t = -5.0; t <= 5.0; t += 1e-4) {
    const double d = (3.0 - 2.0 * t) * (3.0 - 2.0 * t) + t * t;
    if (d < best) {
      best = d;
      best_t = t;
    }
  }
  const Vector projected = project_hyperplane(vec({1, 2}), 3.0, vec({0, 0}));
  CHECK(projected[0] == doctest::Approx(3.0 - 2.0 * best_t).epsilon(1e-3));
  CHECK(projected[1] == doctest::Approx(best_t).epsilon(1e-3));
  CHECK(projected[0] == doctest::Approx(0.6));
  CHECK(projected[1] == doctest::Approx(1.2));

  // Result lies on the plane and the displacement is parallel to the normal.
  const Vector a = vec({1, 2});
  CHECK(a.dot(projected) == doctest::Approx(3.0));
  const Vector d = vec({0, 0}) - projected;
  CHECK(std::abs(d[0] * a[1] - d[1] * a[0]) <= 1e-12);
}

TEST_CASE("logistic_gradient at zero and at saturation") {
  const Vector a = vec({1.0, -2.0, 0.5});
  const Vector zero = Vector::Zero(3);
  const Vector g = logistic_gradient(a, +1, 2.0, zero);
  for (int j = 0; j < 3; ++j) CHECK(g[j] == doctest::Approx(-2.0 * a[j] / 2.0));

  // Far into the correctly-classified region the loss plateaus.
  const Vector far = 100.0 * a;  // b * a'x = 100 * ||a||^2 >> 0
  CHECK(logistic_gradient(a, +1, 1.0, far).norm() <= 1e-12);
}

TEST_CASE("logistic_gradient matches central finite differences") {
  IterationRng rng(7, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4;
    Vector a = random_vector(rng, n);
    Vector x = random_vector(rng, n);
    const int b = rng.next_double() < 0.5 ? -1 : +1;
    const double w = 0.5 + rng.next_double();
    const Vector g = logistic_gradient(a, b, w, x);
    const double h = 1e-6;
    for (int j = 0; j < n; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd =
          (logistic_value(a, b, w, xp) - logistic_value(a, b, w, xm)) / (2.0 * h);
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("resolve_scaled_prox on the absolute value") {
  ScaledProxRequest req;
  req.base = [](const Vector& v, double step) { return soft_threshold(v, step); };
  req.anchor = vec({4.0});
  req.delta = 1.0;
  req.step = 1.0;
  const Vector x = resolve_scaled_prox(req);
  CHECK(x[0] == doctest::Approx(1.5));
  // x solves x = prox_{s f}(u - delta x):
  const Vector back = soft_threshold(vec({4.0 - 1.0 * x[0]}), 1.0);
  CHECK(back[0] == doctest::Approx(x[0]));
}

TEST_CASE("resolve_scaled_prox trivial cases") {
  ScaledProxRequest req;
  req.base = [](const Vector& v, double step) { return soft_threshold(v, step); };
  req.anchor = vec({4.0});
  req.delta = 0.0;
  req.step = 2.0;
  CHECK(resolve_scaled_prox(req)[0] == doctest::Approx(soft_threshold(4.0, 2.0)));

  ScaledProxRequest zero_f;
  zero_f.anchor = vec({4.0, -6.0});
  zero_f.delta = 3.0;
  zero_f.step = 1.0;
  const Vector out = resolve_scaled_prox(zero_f);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(-1.5));
}

TEST_CASE("resolve_scaled_prox satisfies the implicit relation on random inputs") {
  IterationRng rng(99, 1);
  for (int trial = 0; trial < 500; ++trial) {
    ScaledProxRequest req;
    req.base = [](const Vector& v, double step) { return soft_threshold(v, step); };
    req.anchor = random_vector(rng, 5, 6.0);
    req.delta = 3.0 * rng.next_double();
    req.step = 0.1 + 2.0 * rng.next_double();
    const Vector x = resolve_scaled_prox(req);
    const Vector back = soft_threshold(req.anchor - req.delta * x, req.step);
    CHECK((x - back).norm() <= 1e-10);
  }
}

TEST_CASE("built-in proxes are firmly nonexpansive") {
  IterationRng rng(5, 2);
  const Vector normal = vec({1.0, 2.0, -0.5});
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x = random_vector(rng, 3, 5.0);
    const Vector z = random_vector(rng, 3, 5.0);
    {
      const Vector px = soft_threshold(x, 0.7);
      const Vector pz = soft_threshold(z, 0.7);
      CHECK((x - z).dot(px - pz) >= (px - pz).squaredNorm() - 1e-12);
    }
    {
      const Vector px = project_hyperplane(normal, 1.5, x);
      const Vector pz = project_hyperplane(normal, 1.5, z);
      CHECK((x - z).dot(px - pz) >= (px - pz).squaredNorm() - 1e-12);
    }
  }
}

TEST_CASE("prox outputs minimize their objective along 1-D slices") {
  IterationRng rng(11, 3);
  const Vector normal = vec({0.5, -1.0, 2.0});
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = random_vector(rng, 3, 4.0);
    const double tau = 0.2 + rng.next_double();

    const Vector p = soft_threshold(x, tau);
    const Vector dir = random_vector(rng, 3, 1.0).normalized();
    auto objective = [&](double t) {
      const Vector y = p + t * dir;
      return tau * y.lpNorm<1>() + 0.5 * (y - x).squaredNorm();
    };
    const double t_star = golden_min(objective, -1.0, 1.0);
    CHECK(objective(0.0) <= objective(t_star) + 1e-8);

    // Projection: compare against sliding along the plane.
    const Vector q = project_hyperplane(normal, 0.7, x);
    Vector tangent = random_vector(rng, 3, 1.0);
    tangent -= (tangent.dot(normal) / normal.squaredNorm()) * normal;
    tangent.normalize();
    auto dist = [&](double t) { return (q + t * tangent - x).squaredNorm(); };
    const double t_best = golden_min(dist, -1.0, 1.0);
    CHECK(dist(0.0) <= dist(t_best) + 1e-8);
  }
}
