#pragma once

#include <Eigen/Core>

#include <functional>

namespace splitstoch {

using Vector = Eigen::VectorXd;

/// Prox oracle: (point, step) -> argmin_y step*f(y) + 0.5*||y - point||^2.
/// The step is passed explicitly because the solver applies the same f at
/// three different effective steps.
using ProxFn = std::function<Vector(const Vector&, double)>;

/// Componentwise shrinkage sign(v_j) * max(|v_j| - tau, 0); this is the
/// prox of tau*||.||_1.
Vector soft_threshold(const Vector& v, double tau);
double soft_threshold(double v, double tau);

/// Orthogonal projection of x onto the hyperplane {y : a'y = b}.
/// Throws std::invalid_argument when ||a|| = 0.
Vector project_hyperplane(const Vector& a, double b, const Vector& x);

/// Gradient of x -> w * log(1 + exp(-b * a'x)) for a single sample with
/// label b in {-1,+1} and weight w > 0. Evaluates the sigmoid in the
/// overflow-safe branch; the gradient's Lipschitz modulus is w*||a||^2/4.
Vector logistic_gradient(const Vector& a, int b, double w, const Vector& x);

/// Loss value w * log(1 + exp(-b * a'x)), computed as log1p in the stable
/// branch around t = b * a'x = 0.
double logistic_value(const Vector& a, int b, double w, const Vector& x);

/// The implicit relation x = prox_{s f}(u - delta * x) with delta >= 0 has
/// the unique solution x = prox_{s f / (1+delta)}(u / (1+delta)); this
/// helper evaluates that closed form through the base oracle.
struct ScaledProxRequest {
  ProxFn base;    // prox oracle of f
  Vector anchor;  // u
  double delta = 0.0;
  double step = 1.0;  // s
};

Vector resolve_scaled_prox(const ScaledProxRequest& req);

}  // namespace splitstoch
