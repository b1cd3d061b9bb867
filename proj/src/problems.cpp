#include "splitstoch/problems.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

namespace splitstoch {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Residual tolerance for the hyperplane indicator value: the projection
// proxes keep user blocks exactly feasible, so only consensus-level
// violations show up here.
constexpr double kHyperplaneTol = 1e-6;

Eigen::RowVectorXd transform_row(SensingTransform transform, int n, int row) {
  Eigen::RowVectorXd out(n);
  if (transform == SensingTransform::dct) {
    // Orthonormal DCT-II row (row 0 is the constant vector).
    const double scale = row == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int j = 0; j < n; ++j)
      out[j] = scale * std::cos(kPi * (2.0 * j + 1.0) * row / (2.0 * n));
    return out;
  }
  // Real embedding of the DFT: rows 2k-1 / 2k hold cos / sin at frequency
  // k, each normalized to unit length. Frequency 0 (constant) is not in
  // the pool; the sin row at the Nyquist frequency of an even n is zero
  // and is excluded by the pool size below.
  const int freq = (row + 2) / 2;
  const bool is_cos = (row % 2) == 0;
  for (int j = 0; j < n; ++j) {
    const double angle = 2.0 * kPi * freq * j / n;
    out[j] = is_cos ? std::cos(angle) : std::sin(angle);
  }
  const double norm = out.norm();
  return out / norm;
}

int transform_pool_size(SensingTransform transform, int n) {
  if (transform == SensingTransform::dct) return n - 1;  // rows 1..n-1
  // cos rows for k = 1..floor(n/2); sin rows for k = 1..ceil(n/2)-1.
  return n / 2 + (n - 1) / 2;
}

// Maps a pool index to a transform row index: the DCT pool skips row 0.
int pool_to_row(SensingTransform transform, int pool_index) {
  return transform == SensingTransform::dct ? pool_index + 1 : pool_index;
}

std::vector<int> sample_distinct(int count, int pool, IterationRng& rng) {
  std::vector<int> idx(static_cast<size_t>(pool));
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < count; ++j) {
    const int r =
        j + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pool - j)));
    std::swap(idx[static_cast<size_t>(j)], idx[static_cast<size_t>(r)]);
  }
  std::vector<int> out(idx.begin(), idx.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

AgentSpec hyperplane_agent(std::shared_ptr<const Vector> a, double b) {
  AgentSpec agent;
  agent.kind = ProxKind::hyperplane;
  agent.prox = [a, b](const Vector& x, double) {
    return project_hyperplane(*a, b, x);
  };
  agent.f_value = [a, b](const Vector& x) {
    const double r = a->dot(x) - b;
    return std::abs(r) <= kHyperplaneTol * (1.0 + std::abs(b)) ? 0.0 : kInf;
  };
  return agent;
}

AgentSpec l1_agent(double weight) {
  AgentSpec agent;
  agent.kind = ProxKind::l1;
  agent.l1_weight = weight;
  agent.prox = [weight](const Vector& v, double step) {
    return soft_threshold(v, step * weight);
  };
  agent.f_value = [weight](const Vector& x) {
    return weight * x.lpNorm<1>();
  };
  return agent;
}

}  // namespace

std::string to_string(SensingTransform transform) {
  return transform == SensingTransform::dct ? "dct" : "dft";
}

SensingTransform transform_from_string(const std::string& name) {
  if (name == "dct") return SensingTransform::dct;
  if (name == "dft" || name == "dft_real") return SensingTransform::dft_real;
  throw ConfigError("unknown sensing transform: " + name);
}

std::pair<CSInstance, ProblemInstance> build_compressed_sensing(
    int n, int p, double sparsity, SensingTransform transform,
    std::uint64_t seed) {
  if (n < 2 || p < 1 || p >= n)
    throw ConfigError("build_compressed_sensing: need 0 < p < n");
  if (!(sparsity >= 0.0 && sparsity <= 1.0))
    throw ConfigError("build_compressed_sensing: sparsity must lie in [0,1]");
  const int pool = transform_pool_size(transform, n);
  if (p > pool)
    throw ConfigError("build_compressed_sensing: not enough transform rows");

  CSInstance instance;
  instance.n = n;
  instance.p = p;
  instance.transform = transform;
  instance.seed = seed;

  IterationRng row_rng(seed, 1);
  instance.row_indices = sample_distinct(p, pool, row_rng);

  const int nnz = static_cast<int>(std::ceil(sparsity * n));
  IterationRng signal_rng(seed, 2);
  instance.x_true = Vector::Zero(n);
  if (nnz > 0) {
    const std::vector<int> support = sample_distinct(nnz, n, signal_rng);
    for (int j : support) instance.x_true[j] = signal_rng.next_normal();
  }

  instance.A.resize(p, n);
  for (int r = 0; r < p; ++r)
    instance.A.row(r) =
        transform_row(transform, n, pool_to_row(transform, instance.row_indices[static_cast<size_t>(r)]));
  instance.b = instance.A * instance.x_true;

  ProblemInstance problem = make_cs_problem(instance);
  return {std::move(instance), std::move(problem)};
}

ProblemInstance make_cs_problem(const CSInstance& instance) {
  ProblemInstance problem;
  problem.n = instance.n;
  std::ostringstream name;
  name << "cs-" << to_string(instance.transform) << "-n" << instance.n << "-p"
       << instance.p << "-seed" << instance.seed;
  problem.name = name.str();
  problem.agents.reserve(static_cast<size_t>(instance.p) + 1);
  for (int r = 0; r < instance.p; ++r) {
    auto row = std::make_shared<const Vector>(instance.A.row(r).transpose());
    problem.agents.push_back(hyperplane_agent(std::move(row), instance.b[r]));
  }
  problem.agents.push_back(l1_agent(1.0));
  return problem;
}

void save_cs_instance(const CSInstance& instance, const std::string& path) {
  nlohmann::json doc;
  doc["n"] = instance.n;
  doc["p"] = instance.p;
  doc["transform"] = to_string(instance.transform);
  doc["seed"] = instance.seed;
  doc["row_indices"] = instance.row_indices;
  std::vector<double> x(instance.x_true.data(),
                        instance.x_true.data() + instance.x_true.size());
  doc["x_true"] = x;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

CSInstance load_cs_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json doc;
  in >> doc;

  CSInstance instance;
  instance.n = doc.at("n").get<int>();
  instance.p = doc.at("p").get<int>();
  instance.transform = transform_from_string(doc.at("transform").get<std::string>());
  instance.seed = doc.at("seed").get<std::uint64_t>();
  instance.row_indices = doc.at("row_indices").get<std::vector<int>>();
  const auto x = doc.at("x_true").get<std::vector<double>>();
  if (static_cast<int>(x.size()) != instance.n)
    throw std::runtime_error("x_true length does not match n in " + path);
  instance.x_true = Eigen::Map<const Vector>(x.data(), instance.n);

  instance.A.resize(instance.p, instance.n);
  for (int r = 0; r < instance.p; ++r)
    instance.A.row(r) = transform_row(
        instance.transform, instance.n,
        pool_to_row(instance.transform, instance.row_indices.at(static_cast<size_t>(r))));
  instance.b = instance.A * instance.x_true;
  return instance;
}

ParseError::ParseError(int line_, const std::string& reason_)
    : std::runtime_error("libsvm parse error at line " + std::to_string(line_) +
                         ": " + reason_),
      line(line_),
      reason(reason_) {}

Dataset parse_libsvm(std::istream& in) {
  Dataset data;
  std::vector<double> raw_labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;  // blank or comment-only line

    double label;
    try {
      size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad label '" + tok + "'");
    }

    std::vector<SparseEntry> row;
    int prev_index = 0;
    while (tokens >> tok) {
      const size_t colon = tok.find(':');
      if (colon == std::string::npos)
        throw ParseError(line_no, "expected index:value, got '" + tok + "'");
      int index;
      double value;
      try {
        size_t used = 0;
        index = std::stoi(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(tok);
        const std::string vs = tok.substr(colon + 1);
        value = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad feature '" + tok + "'");
      }
      if (index < 1) throw ParseError(line_no, "indices are 1-based");
      if (index <= prev_index)
        throw ParseError(line_no, "indices must be strictly ascending");
      prev_index = index;
      row.push_back({index - 1, value});
      data.n = std::max(data.n, index);
    }
    raw_labels.push_back(label);
    data.features.push_back(std::move(row));
  }

  std::vector<double> distinct = raw_labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  auto subset_of = [&](std::initializer_list<double> allowed) {
    return std::all_of(distinct.begin(), distinct.end(), [&](double v) {
      return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    });
  };
  double negative_value;
  if (subset_of({-1.0, 1.0}))
    negative_value = -1.0;
  else if (subset_of({0.0, 1.0}))
    negative_value = 0.0;
  else if (subset_of({1.0, 2.0}))
    negative_value = 1.0;
  else {
    std::ostringstream os;
    os << "labels are not binary {";
    for (size_t i = 0; i < distinct.size(); ++i)
      os << (i ? "," : "") << distinct[i];
    os << "}";
    throw NonBinaryLabels(os.str());
  }
  data.labels.reserve(raw_labels.size());
  for (double v : raw_labels) data.labels.push_back(v == negative_value ? -1 : +1);
  return data;
}

Dataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return parse_libsvm(in);
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                             double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("split_train_test: fraction must lie in (0,1)");
  const int total = data.size();
  std::vector<int> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  IterationRng rng(seed, 0);
  for (int j = 0; j < total - 1; ++j) {
    const int r =
        j + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(total - j)));
    std::swap(order[static_cast<size_t>(j)], order[static_cast<size_t>(r)]);
  }
  const int train_size = static_cast<int>(std::ceil(train_fraction * total));

  Dataset train, test;
  train.n = test.n = data.n;
  for (int at = 0; at < total; ++at) {
    Dataset& dst = at < train_size ? train : test;
    const int i = order[static_cast<size_t>(at)];
    dst.features.push_back(data.features[static_cast<size_t>(i)]);
    dst.labels.push_back(data.labels[static_cast<size_t>(i)]);
  }
  return {std::move(train), std::move(test)};
}

Dataset make_synthetic_binary_dataset(int samples, int features,
                                      std::uint64_t seed) {
  if (samples < 1 || features < 1)
    throw ConfigError("make_synthetic_binary_dataset: bad shape");
  IterationRng rng(seed, 7);
  Vector teacher(features);
  for (int j = 0; j < features; ++j) teacher[j] = rng.next_normal();

  Dataset data;
  data.n = features;
  data.features.reserve(static_cast<size_t>(samples));
  data.labels.reserve(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    std::vector<SparseEntry> row;
    double score = 0.0;
    for (int j = 0; j < features; ++j) {
      if (rng.next_double() < 0.2) {
        row.push_back({j, 1.0});
        score += teacher[j];
      }
    }
    score += 0.5 * rng.next_normal();
    data.features.push_back(std::move(row));
    data.labels.push_back(score >= 0.0 ? +1 : -1);
  }
  return data;
}

ProblemInstance build_logistic(const Dataset& data, int m_agents, double lambda_lo,
                               double lambda_hi, std::uint64_t seed) {
  if (m_agents < 2) throw ConfigError("build_logistic: need at least 2 agents");
  if (!(lambda_lo <= lambda_hi) || lambda_lo < 0.0)
    throw ConfigError("build_logistic: bad lambda range");
  const int total = data.size();
  if (m_agents > total)
    throw EmptyBlock("build_logistic: more agents than samples");

  struct Block {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
  };

  // Round-robin assignment: sample i belongs to block i mod m_agents.
  std::vector<int> block_size(static_cast<size_t>(m_agents), 0);
  for (int i = 0; i < total; ++i) ++block_size[static_cast<size_t>(i % m_agents)];

  std::vector<std::shared_ptr<Block>> blocks;
  blocks.reserve(static_cast<size_t>(m_agents));
  std::vector<int> fill(static_cast<size_t>(m_agents), 0);
  for (int j = 0; j < m_agents; ++j) {
    auto block = std::make_shared<Block>();
    block->A = Eigen::MatrixXd::Zero(block_size[static_cast<size_t>(j)], data.n);
    block->b.resize(block_size[static_cast<size_t>(j)]);
    blocks.push_back(std::move(block));
  }
  for (int i = 0; i < total; ++i) {
    const int j = i % m_agents;
    Block& block = *blocks[static_cast<size_t>(j)];
    const int r = fill[static_cast<size_t>(j)]++;
    for (const SparseEntry& e : data.features[static_cast<size_t>(i)])
      block.A(r, e.index) = e.value;
    block.b[r] = data.labels[static_cast<size_t>(i)];
  }

  IterationRng lambda_rng(seed, 3);
  const double inv_total = 1.0 / static_cast<double>(total);

  ProblemInstance problem;
  problem.n = data.n;
  problem.name = "logistic-m" + std::to_string(m_agents) + "-N" +
                 std::to_string(total);
  problem.agents.reserve(static_cast<size_t>(m_agents));
  for (int j = 0; j < m_agents; ++j) {
    auto block = blocks[static_cast<size_t>(j)];
    const double lambda_j =
        lambda_lo + (lambda_hi - lambda_lo) * lambda_rng.next_double();
    // lambda_j enters per sample under the 1/N normalization, so the
    // agent's effective l1 weight carries its block's share; with one
    // sample per agent this is exactly the (1/m)-averaged objective.
    const double block_weight =
        static_cast<double>(block_size[static_cast<size_t>(j)]) / total;
    AgentSpec agent = l1_agent(lambda_j * block_weight);
    agent.g_value = [block, inv_total](const Vector& x) {
      const Eigen::VectorXd t = block->b.cwiseProduct(block->A * x);
      double total_loss = 0.0;
      for (Eigen::Index r = 0; r < t.size(); ++r) {
        const double tr = t[r];
        total_loss += tr >= 0.0 ? std::log1p(std::exp(-tr))
                                : -tr + std::log1p(std::exp(tr));
      }
      return inv_total * total_loss;
    };
    agent.grad = [block, inv_total](const Vector& x) {
      const Eigen::VectorXd t = block->b.cwiseProduct(block->A * x);
      Eigen::VectorXd coeff(t.size());
      for (Eigen::Index r = 0; r < t.size(); ++r) {
        const double tr = t[r];
        const double s = tr >= 0.0 ? std::exp(-tr) / (1.0 + std::exp(-tr))
                                   : 1.0 / (1.0 + std::exp(tr));
        coeff[r] = -inv_total * block->b[r] * s;
      }
      return Vector(block->A.transpose() * coeff);
    };
    // Exact gradient modulus: the block Hessian at the origin is
    // (1/4N) A'A, whose top eigenvalue dominates it everywhere.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(
        block->A.transpose() * block->A);
    agent.lipschitz = inv_total * spectrum.eigenvalues().maxCoeff() / 4.0;
    problem.agents.push_back(std::move(agent));
  }
  return problem;
}

ProblemInstance build_toy1d() {
  ProblemInstance problem;
  problem.n = 1;
  problem.name = "toy1d";

  AgentSpec user = l1_agent(1.0);
  problem.agents.push_back(std::move(user));

  AgentSpec server;
  server.kind = ProxKind::zero;
  server.lipschitz = 1.0;
  server.grad = [](const Vector& x) { return Vector(x.array() - 2.0); };
  server.g_value = [](const Vector& x) {
    return 0.5 * (x.array() - 2.0).matrix().squaredNorm();
  };
  problem.agents.push_back(std::move(server));
  return problem;
}

ProblemInstance build_l1_quadratic(const Vector& c) {
  ProblemInstance problem;
  problem.n = static_cast<int>(c.size());
  problem.name = "l1-quadratic-n" + std::to_string(problem.n);

  problem.agents.push_back(l1_agent(1.0));

  AgentSpec smooth;
  smooth.kind = ProxKind::zero;
  smooth.lipschitz = 1.0;
  smooth.grad = [c](const Vector& x) { return Vector(x - c); };
  smooth.g_value = [c](const Vector& x) { return 0.5 * (x - c).squaredNorm(); };
  problem.agents.push_back(std::move(smooth));

  AgentSpec server;
  server.kind = ProxKind::zero;
  problem.agents.push_back(std::move(server));
  return problem;
}

}  // namespace splitstoch
