#include "splitstoch/experiment.hpp"

#include "splitstoch/diagnostics.hpp"
#include "splitstoch/problems.hpp"
#include "splitstoch/solver.hpp"
#include "splitstoch/trace_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace splitstoch {

namespace {

namespace fs = std::filesystem;

int thread_cap() {
  if (const char* env = std::getenv("SPLITSTOCH_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::optional<double> parse_auto(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(flag) + " expects a number or 'auto'");
  }
}

struct RunSummary {
  int index = 0;
  std::uint64_t seed = 0;
  long iterations = 0;
  bool converged = false;
  bool max_iters_exceeded = false;
  TraceRecord final_record;
  double recovery_rel_error = -1.0;  // cs only
};

}  // namespace

int run_experiment(const std::vector<std::string>& args) {
  CLI::App app{"Experiment runner for the stochastic regularized splitting solver"};

  std::string problem_name;
  std::uint64_t seed = 12345;
  int repeats = 1;
  long iters = 1000;
  double tol = 1e-10;
  double participation = 1.0;
  double alpha = 1.0;
  double sigma = 0.5;
  std::string gamma_text = "auto";
  std::string lambda_text = "auto";
  std::string output_dir = "out";
  bool timing = false;
  double eps_check = 0.0;

  int cs_n = 2500;
  double cs_rows = 0.25;
  double cs_sparsity = 0.01;
  std::string cs_transform = "dct";

  std::string data_path;
  int synthetic_samples = 0;
  int synthetic_features = 0;
  double train_frac = 0.75;
  double lambda_lo = 1e-3;
  double lambda_hi = 1e-2;
  int agents = 20;

  app.add_option("--problem", problem_name, "Problem family: cs | logistic | toy1d")
      ->check(CLI::IsMember({"cs", "logistic", "toy1d"}));
  app.set_config("--config", "", "Read flag values from a key=value file");
  app.add_option("--seed", seed, "Base seed; run r uses a seed derived from (seed, r)");
  app.add_option("--repeats", repeats, "Number of independently seeded runs")
      ->check(CLI::PositiveNumber);
  app.add_option("--iters", iters, "Minimum iteration count K")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "Stopping tolerance on the relative consensus error");
  app.add_option("--participation", participation,
                 "Fraction of users activated per iteration, in (0,1]");
  app.add_option("--alpha", alpha, "Regularization weight alpha_i (uniform)");
  app.add_option("--sigma", sigma, "Gradient split parameter in [0,1]");
  app.add_option("--gamma", gamma_text, "Step size, or 'auto' for 0.9x the window top");
  app.add_option("--lambda-relax", lambda_text,
                 "Relaxation lambda_i, or 'auto' for min(1, 0.99x window top)");
  app.add_option("--output", output_dir, "Output directory");
  app.add_flag("--timing", timing,
               "Record wall-clock time per trace row (breaks byte-for-byte replay)");
  app.add_option("--eps-check", eps_check,
                 "Also estimate the in-expectation optimality margins at this "
                 "eps over the repeated runs (writes eps_report.json)");

  app.add_option("--n", cs_n, "cs: signal dimension");
  app.add_option("--rows", cs_rows, "cs: measurement fraction p/n in (0,1)");
  app.add_option("--sparsity", cs_sparsity, "cs: nonzero fraction of the true signal");
  app.add_option("--transform", cs_transform, "cs: dct | dft")
      ->check(CLI::IsMember({"dct", "dft"}));

  app.add_option("--data", data_path, "logistic: LIBSVM file");
  app.add_option("--synthetic-samples", synthetic_samples,
                 "logistic: generate this many synthetic samples instead of --data");
  app.add_option("--synthetic-features", synthetic_features,
                 "logistic: feature count for the synthetic dataset");
  app.add_option("--train-frac", train_frac, "logistic: training fraction of the split");
  app.add_option("--lambda-lo", lambda_lo, "logistic: lower end of the l1 weight range");
  app.add_option("--lambda-hi", lambda_hi, "logistic: upper end of the l1 weight range");
  app.add_option("--agents", agents, "logistic: number of agents (server included)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  }

  if (problem_name.empty()) {
    std::cerr << "error: --problem is required (cs | logistic | toy1d)\n";
    return kExitConfigError;
  }

  try {
    fs::create_directories(output_dir);

    ProblemInstance problem;
    std::optional<CSInstance> cs_instance;
    if (problem_name == "cs") {
      const int p = static_cast<int>(std::llround(cs_rows * cs_n));
      auto built = build_compressed_sensing(cs_n, p, cs_sparsity,
                                            transform_from_string(cs_transform), seed);
      cs_instance = std::move(built.first);
      problem = std::move(built.second);
      save_cs_instance(*cs_instance, (fs::path(output_dir) / "cs_instance.json").string());
    } else if (problem_name == "logistic") {
      Dataset full;
      if (synthetic_samples > 0) {
        if (synthetic_features < 1) {
          std::cerr << "error: --synthetic-features must be >= 1\n";
          return kExitConfigError;
        }
        full = make_synthetic_binary_dataset(synthetic_samples, synthetic_features, seed);
      } else if (!data_path.empty()) {
        full = parse_libsvm_file(data_path);
      } else {
        std::cerr << "error: logistic needs --data or --synthetic-samples\n";
        return kExitConfigError;
      }
      auto [train, test] = split_train_test(full, train_frac, seed);
      (void)test;  // held out; accuracy reporting is out of scope here
      problem = build_logistic(train, agents, lambda_lo, lambda_hi, seed);
    } else {
      problem = build_toy1d();
    }

    SolverConfig config = default_config(
        problem, alpha, sigma, ParticipationPolicy::FixedFraction(participation),
        iters, tol, seed, parse_auto(gamma_text, "--gamma"),
        parse_auto(lambda_text, "--lambda-relax"));

    const ValidationReport report = validate_config(problem, config);
    std::cout << "problem: " << problem.name << " (m=" << problem.num_agents()
              << ", n=" << problem.n << ")\n";
    std::cout << "gamma window: (0, " << format_double(report.gamma_max)
              << "), using gamma=" << format_double(config.gamma) << "\n";
    double lambda_top = kInf;
    for (double t : report.lambda_max) lambda_top = std::min(lambda_top, t);
    std::cout << "lambda windows: (0, " << format_double(lambda_top)
              << ") at the tightest user, using lambda="
              << format_double(config.lambda.front()) << "\n";
    if (!report.ok) {
      std::cerr << "error: " << report.summary() << "\n";
      return kExitConfigError;
    }

    const int cap = thread_cap();
    const int run_workers = std::min(cap, repeats);
    const int solver_threads = repeats > 1 ? 1 : cap;

    std::vector<RunResult> results(static_cast<size_t>(repeats));
    std::vector<std::string> failures(static_cast<size_t>(repeats));
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= repeats) return;
        SolverConfig local = config;
        local.seed = derive_run_seed(seed, r);
        RunOptions options;
        options.n_threads = solver_threads;
        options.measure_time = timing;
        try {
          results[static_cast<size_t>(r)] = run(problem, local, std::nullopt, options);
        } catch (const std::exception& e) {
          failures[static_cast<size_t>(r)] = e.what();
        }
      }
    };
    {
      std::vector<std::thread> pool;
      for (int w = 0; w < run_workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (int r = 0; r < repeats; ++r) {
      if (!failures[static_cast<size_t>(r)].empty()) {
        std::cerr << "error: run " << r << ": " << failures[static_cast<size_t>(r)] << "\n";
        return kExitSolverError;
      }
    }

    std::vector<std::vector<TraceRecord>> traces;
    std::vector<RunSummary> summaries;
    for (int r = 0; r < repeats; ++r) {
      const RunResult& result = results[static_cast<size_t>(r)];
      const std::string trace_name = "run_" + std::to_string(r) + ".csv";
      write_trace_csv((fs::path(output_dir) / trace_name).string(), result.trace);
      traces.push_back(result.trace);

      RunSummary summary;
      summary.index = r;
      summary.seed = derive_run_seed(seed, r);
      summary.iterations = result.state.k;
      summary.converged = result.converged;
      summary.max_iters_exceeded = result.max_iters_exceeded;
      summary.final_record = result.trace.back();
      if (cs_instance) {
        const double true_norm = cs_instance->x_true.norm();
        const double err = (result.state.x - cs_instance->x_true).norm();
        summary.recovery_rel_error = true_norm > 0.0 ? err / true_norm : err;
        write_recovered_csv(
            (fs::path(output_dir) / ("recovered_" + std::to_string(r) + ".csv")).string(),
            result.state.x, cs_instance->x_true);
      }
      summaries.push_back(summary);

      std::cout << "run " << r << ": k=" << summary.iterations
                << " stopping_error=" << format_double(summary.final_record.stopping_error)
                << " phi=" << format_double(summary.final_record.phi);
      if (cs_instance)
        std::cout << " recovery=" << format_double(summary.recovery_rel_error);
      std::cout << (summary.converged ? "" : " [tolerance not reached]") << "\n";
    }

    write_aggregate_csv((fs::path(output_dir) / "aggregate.csv").string(), traces);

    // Snapshot every flag value so the file can be fed back via --config.
    {
      std::ofstream cfg((fs::path(output_dir) / "config.txt"));
      cfg << "problem=" << problem_name << "\n";
      cfg << "seed=" << seed << "\n";
      cfg << "repeats=" << repeats << "\n";
      cfg << "iters=" << iters << "\n";
      cfg << "tol=" << format_double(tol) << "\n";
      cfg << "participation=" << format_double(participation) << "\n";
      cfg << "alpha=" << format_double(alpha) << "\n";
      cfg << "sigma=" << format_double(sigma) << "\n";
      cfg << "gamma=" << gamma_text << "\n";
      cfg << "lambda-relax=" << lambda_text << "\n";
      cfg << "timing=" << (timing ? "true" : "false") << "\n";
      if (eps_check > 0.0) cfg << "eps-check=" << format_double(eps_check) << "\n";
      if (problem_name == "cs") {
        cfg << "n=" << cs_n << "\n";
        cfg << "rows=" << format_double(cs_rows) << "\n";
        cfg << "sparsity=" << format_double(cs_sparsity) << "\n";
        cfg << "transform=" << cs_transform << "\n";
      } else if (problem_name == "logistic") {
        if (!data_path.empty()) cfg << "data=" << data_path << "\n";
        if (synthetic_samples > 0) {
          cfg << "synthetic-samples=" << synthetic_samples << "\n";
          cfg << "synthetic-features=" << synthetic_features << "\n";
        }
        cfg << "train-frac=" << format_double(train_frac) << "\n";
        cfg << "lambda-lo=" << format_double(lambda_lo) << "\n";
        cfg << "lambda-hi=" << format_double(lambda_hi) << "\n";
        cfg << "agents=" << agents << "\n";
      }
    }

    nlohmann::json eps_report;
    if (eps_check > 0.0) {
      const ReferenceSolution ref = reference_solve(problem, 1e-9);
      const EpsOptimalityReport er = eps_optimality(
          problem, config, std::max(2, repeats), eps_check, ref.phi_star);
      eps_report = {{"eps", eps_check},
                    {"runs", er.runs},
                    {"phi_star", ref.phi_star},
                    {"consensus_margin", er.consensus_margin},
                    {"objective_margin", er.objective_margin},
                    {"pass", er.pass}};
      std::ofstream((fs::path(output_dir) / "eps_report.json"))
          << eps_report.dump(2) << "\n";
      std::cout << "eps-optimality at eps=" << format_double(eps_check)
                << ": consensus margin " << format_double(er.consensus_margin)
                << ", objective margin " << format_double(er.objective_margin)
                << (er.pass ? " [within eps]" : " [exceeds eps]") << "\n";
    }

    nlohmann::json manifest;
    manifest["problem"] = problem.name;
    manifest["config"] = {
        {"problem", problem_name}, {"seed", seed}, {"repeats", repeats},
        {"iters", iters}, {"tol", tol}, {"participation", participation},
        {"alpha", alpha}, {"sigma", sigma}, {"gamma", config.gamma},
        {"lambda", config.lambda.front()}, {"timing", timing}};
    if (problem_name == "cs")
      manifest["config_cs"] = {{"n", cs_n}, {"rows", cs_rows},
                               {"sparsity", cs_sparsity}, {"transform", cs_transform}};
    if (problem_name == "logistic")
      manifest["config_logistic"] = {
          {"data", data_path}, {"synthetic_samples", synthetic_samples},
          {"synthetic_features", synthetic_features}, {"train_frac", train_frac},
          {"lambda_lo", lambda_lo}, {"lambda_hi", lambda_hi}, {"agents", agents}};
    manifest["gamma_window_top"] = report.gamma_max;
    if (!eps_report.is_null()) manifest["eps_report"] = eps_report;
    manifest["runs"] = nlohmann::json::array();
    for (const RunSummary& s : summaries) {
      nlohmann::json row = {
          {"run", s.index},         {"seed", s.seed},
          {"iterations", s.iterations}, {"converged", s.converged},
          {"max_iters_exceeded", s.max_iters_exceeded},
          {"stopping_error", s.final_record.stopping_error},
          {"phi", s.final_record.phi}, {"h_value", s.final_record.h_value},
          {"prox_calls", s.final_record.prox_calls},
          {"grad_calls", s.final_record.grad_calls},
          {"trace_file", "run_" + std::to_string(s.index) + ".csv"}};
      if (s.recovery_rel_error >= 0.0) row["recovery_rel_error"] = s.recovery_rel_error;
      manifest["runs"].push_back(std::move(row));
    }
    {
      std::ofstream mf((fs::path(output_dir) / "manifest.json"));
      mf << manifest.dump(2) << "\n";
    }
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParseError;
  } catch (const NonBinaryLabels& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParseError;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace splitstoch
