#include "splitstoch/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace splitstoch {

double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

Vector soft_threshold(const Vector& v, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("soft_threshold: tau must be positive");
  Vector out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], tau);
  return out;
}

Vector project_hyperplane(const Vector& a, double b, const Vector& x) {
  const double nn = a.squaredNorm();
  if (!(nn > 0.0)) throw std::invalid_argument("project_hyperplane: zero normal");
  return x - ((a.dot(x) - b) / nn) * a;
}

namespace {

// sigma(-t) = 1 / (1 + exp(t)) without overflow for either sign of t.
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

Vector logistic_gradient(const Vector& a, int b, double w, const Vector& x) {
  if (b != 1 && b != -1) throw std::invalid_argument("logistic_gradient: label must be +/-1");
  if (!(w > 0.0)) throw std::invalid_argument("logistic_gradient: weight must be positive");
  const double t = b * a.dot(x);
  return (-w * b * sigmoid_neg(t)) * a;
}

double logistic_value(const Vector& a, int b, double w, const Vector& x) {
  const double t = b * a.dot(x);
  // log(1 + exp(-t)) = log1p(exp(-t)) for t >= 0, = -t + log1p(exp(t)) otherwise
  if (t >= 0.0) return w * std::log1p(std::exp(-t));
  return w * (-t + std::log1p(std::exp(t)));
}

Vector resolve_scaled_prox(const ScaledProxRequest& req) {
  if (!(req.delta >= 0.0)) throw std::invalid_argument("resolve_scaled_prox: delta must be >= 0");
  if (!(req.step > 0.0)) throw std::invalid_argument("resolve_scaled_prox: step must be > 0");
  const double scale = 1.0 + req.delta;
  if (!req.base) return req.anchor / scale;  // f == 0: prox is the identity
  return req.base(req.anchor / scale, req.step / scale);
}

}  // namespace splitstoch
