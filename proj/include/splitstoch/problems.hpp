#pragma once

#include "splitstoch/types.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace splitstoch {

// ---------------------------------------------------------------------------
// Compressed sensing
// ---------------------------------------------------------------------------

enum class SensingTransform { dct, dft_real };

/// A sensing instance: p rows of an orthonormal transform, a sparse ground
/// truth, and consistent measurements b = A x_true. Row indices refer to
/// the transform's row pool, so the instance can be rebuilt exactly from
/// (n, p, transform, seed, row_indices, x_true).
struct CSInstance {
  int n = 0;
  int p = 0;
  SensingTransform transform = SensingTransform::dct;
  std::uint64_t seed = 0;
  std::vector<int> row_indices;
  Eigen::MatrixXd A;
  Vector b;
  Vector x_true;
};

/// Builds a compressed sensing instance with ceil(sparsity * n)
/// standard-normal nonzeros at uniform positions, rows drawn without
/// replacement from the transform pool (the constant row is excluded),
/// and the consensus problem where user i enforces the hyperplane
/// a_i'x = b_i and the server carries the l1 term.
/// Requires 0 < p < n and 0 <= sparsity <= 1.
std::pair<CSInstance, ProblemInstance> build_compressed_sensing(
    int n, int p, double sparsity, SensingTransform transform,
    std::uint64_t seed);

/// The consensus problem for an existing instance (used after load).
ProblemInstance make_cs_problem(const CSInstance& instance);

void save_cs_instance(const CSInstance& instance, const std::string& path);
CSInstance load_cs_instance(const std::string& path);

std::string to_string(SensingTransform transform);
SensingTransform transform_from_string(const std::string& name);

// ---------------------------------------------------------------------------
// Datasets (LIBSVM sparse format)
// ---------------------------------------------------------------------------

struct SparseEntry {
  int index = 0;  // 0-based
  double value = 0.0;
};

struct Dataset {
  std::vector<std::vector<SparseEntry>> features;
  std::vector<int> labels;  // +1 / -1
  int n = 0;                // feature dimension

  int size() const { return static_cast<int>(features.size()); }
};

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& reason);
  int line;
  std::string reason;
};

struct NonBinaryLabels : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses `<label> <index>:<value> ...` lines with 1-based ascending
/// indices; `#` starts a comment. Label sets {-1,+1}, {0,1} and {1,2} are
/// normalized to -1/+1 (in that order of preference); anything else
/// raises NonBinaryLabels. The dimension is the largest index seen.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm_file(const std::string& path);

/// Seeded uniform split: the first ceil(f * N) entries of a random
/// permutation form the training set. Requires 0 < f < 1.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                             double train_fraction,
                                             std::uint64_t seed);

/// Random binary design with one-hot-style 0/1 features and labels from a
/// noisy linear teacher; a stand-in for categorical benchmark sets.
Dataset make_synthetic_binary_dataset(int samples, int features,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Logistic regression with per-agent l1 terms
// ---------------------------------------------------------------------------

struct EmptyBlock : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Splits the samples round-robin into m_agents blocks (the last block is
/// the server's). Agent j carries g_j(x) = (1/N) sum_{i in block j}
/// log(1 + exp(-b_i a_i'x)) and f_j = (|block j|/N) lambda_j ||x||_1 with
/// lambda_j drawn uniformly from [lo, hi]; the full objective is
/// (1/N) sum_i [loss_i(x) + lambda_{block(i)} ||x||_1], the per-sample
/// averaged form (exact when every agent holds one sample).
ProblemInstance build_logistic(const Dataset& data, int m_agents, double lambda_lo,
                               double lambda_hi, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Closed-form toys
// ---------------------------------------------------------------------------

/// One user with f = |.|, server with g = (x-2)^2/2; minimizer x* = 1,
/// objective value 1.5.
ProblemInstance build_toy1d();

/// Two users (f_1 = ||.||_1 and g_2 = ||x - c||^2/2) plus a trivial
/// server; minimizer soft_threshold(c, 1).
ProblemInstance build_l1_quadratic(const Vector& c);

}  // namespace splitstoch
