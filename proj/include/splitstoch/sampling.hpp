#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace splitstoch {

/// Counter-based pseudo-random stream keyed by (seed, iteration).
///
/// Every iteration of a run gets an independent stream derived only from
/// the pair (seed, iteration), so any iteration can be replayed without
/// generating the draws that precede it. Within one stream, values come
/// from the SplitMix64 sequence (Steele, Lea & Flood mixing constants).
class IterationRng {
 public:
  IterationRng(std::uint64_t seed, std::uint64_t iteration);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53 bits of precision.
  double next_double();

  /// Unbiased uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal variate (Box-Muller; consumes two uniforms).
  double next_normal();

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// How the active user subset S_k is chosen at each iteration.
///
/// bernoulli: user i joins independently with probability p[i].
/// fixed_fraction: a uniformly random subset of exactly
/// max(1, round(rho * num_users)) users joins; memberships are dependent
/// across users within one iteration, which is fine because the draw
/// never looks at iterate values.
struct ParticipationPolicy {
  enum class Mode { bernoulli, fixed_fraction };

  Mode mode = Mode::fixed_fraction;
  std::vector<double> p;  // bernoulli only; one entry per user
  double rho = 1.0;       // fixed_fraction only

  static ParticipationPolicy Bernoulli(std::vector<double> probs);
  static ParticipationPolicy FixedFraction(double rho);
};

/// Active subset at one iteration. `members` holds 0-based user indices,
/// sorted ascending. May be empty in bernoulli mode (everyone carries over).
struct SampleDraw {
  long k = 0;
  std::vector<int> members;

  bool contains(int i) const;
};

/// Draws S_k over num_users users. The draw is a pure function of
/// (policy, num_users, k, seed); it never sees iterate values, so it is
/// independent of the optimization history by construction.
SampleDraw draw(const ParticipationPolicy& policy, int num_users, long k,
                std::uint64_t seed);

/// P(i in S_k) for 0-based user index i out of num_users.
/// bernoulli -> p[i]; fixed_fraction -> subset_size / num_users.
double inclusion_probability(const ParticipationPolicy& policy, int i,
                             int num_users);

/// Subset size used by fixed_fraction mode: max(1, round(rho * num_users)).
int fixed_fraction_size(double rho, int num_users);

/// Derives the seed for repeat r of a multi-run experiment from a base seed.
std::uint64_t derive_run_seed(std::uint64_t base_seed, int run_index);

}  // namespace splitstoch
