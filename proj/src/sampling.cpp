#include "splitstoch/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splitstoch {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

IterationRng::IterationRng(std::uint64_t seed, std::uint64_t iteration) {
  // Two mixing rounds decorrelate (seed, iteration) pairs that differ in
  // a single bit.
  state_ = mix64(mix64(seed) ^ (iteration * kGolden + 1));
}

std::uint64_t IterationRng::next_u64() {
  state_ += kGolden;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double IterationRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t IterationRng::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below: n must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t v = next_u64();
  while (v > limit) v = next_u64();
  return v % n;
}

double IterationRng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

ParticipationPolicy ParticipationPolicy::Bernoulli(std::vector<double> probs) {
  for (double pi : probs) {
    if (!(pi > 0.0 && pi <= 1.0))
      throw std::invalid_argument("bernoulli probabilities must lie in (0,1]");
  }
  ParticipationPolicy policy;
  policy.mode = Mode::bernoulli;
  policy.p = std::move(probs);
  return policy;
}

ParticipationPolicy ParticipationPolicy::FixedFraction(double rho) {
  if (!(rho > 0.0 && rho <= 1.0))
    throw std::invalid_argument("fixed_fraction rho must lie in (0,1]");
  ParticipationPolicy policy;
  policy.mode = Mode::fixed_fraction;
  policy.rho = rho;
  return policy;
}

bool SampleDraw::contains(int i) const {
  return std::binary_search(members.begin(), members.end(), i);
}

int fixed_fraction_size(double rho, int num_users) {
  const int s = static_cast<int>(std::llround(rho * num_users));
  return std::max(1, s);
}

SampleDraw draw(const ParticipationPolicy& policy, int num_users, long k,
                std::uint64_t seed) {
  if (num_users <= 0) throw std::invalid_argument("draw: num_users must be positive");
  IterationRng rng(seed, static_cast<std::uint64_t>(k));
  SampleDraw out;
  out.k = k;
  if (policy.mode == ParticipationPolicy::Mode::bernoulli) {
    if (static_cast<int>(policy.p.size()) != num_users)
      throw std::invalid_argument("bernoulli policy size mismatch");
    for (int i = 0; i < num_users; ++i) {
      if (rng.next_double() < policy.p[i]) out.members.push_back(i);
    }
  } else {
    // Partial Fisher-Yates: the first s entries of a random permutation
    // form a uniform size-s subset.
    const int s = fixed_fraction_size(policy.rho, num_users);
    std::vector<int> idx(num_users);
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < s; ++j) {
      const int r = j + static_cast<int>(rng.next_below(
                            static_cast<std::uint64_t>(num_users - j)));
      std::swap(idx[j], idx[r]);
    }
    out.members.assign(idx.begin(), idx.begin() + s);
    std::sort(out.members.begin(), out.members.end());
  }
  return out;
}

double inclusion_probability(const ParticipationPolicy& policy, int i,
                             int num_users) {
  if (i < 0 || i >= num_users)
    throw std::out_of_range("inclusion_probability: user index out of range");
  if (policy.mode == ParticipationPolicy::Mode::bernoulli) {
    if (static_cast<int>(policy.p.size()) != num_users)
      throw std::invalid_argument("bernoulli policy size mismatch");
    return policy.p[i];
  }
  return static_cast<double>(fixed_fraction_size(policy.rho, num_users)) /
         static_cast<double>(num_users);
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, int run_index) {
  return mix64(base_seed ^ mix64(static_cast<std::uint64_t>(run_index) + 0x5D2E1F));
}

}  // namespace splitstoch
