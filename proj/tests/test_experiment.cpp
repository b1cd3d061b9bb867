#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splitstoch/experiment.hpp"
#include "splitstoch/sampling.hpp"
#include "splitstoch/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace splitstoch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("exp_test") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(std::vector<std::string> flags) {
  flags.insert(flags.begin(), "splitstoch_cli");
  return run_experiment(flags);
}

}  // namespace

TEST_CASE("toy1d experiment writes its artifacts and nails the optimum") {
  const fs::path dir = fresh_dir("toy");
  const int code = run_cli({"--problem", "toy1d", "--iters", "1000",
                            "--tol", "1e-14", "--output", dir.string()});
  CHECK(code == kExitOk);
  CHECK(fs::exists(dir / "run_0.csv"));
  CHECK(fs::exists(dir / "aggregate.csv"));
  CHECK(fs::exists(dir / "config.txt"));
  CHECK(fs::exists(dir / "manifest.json"));

  nlohmann::json manifest;
  std::ifstream(dir / "manifest.json") >> manifest;
  const double phi = manifest["runs"][0]["phi"].get<double>();
  CHECK(std::abs(phi - 1.5) <= 1e-6);

  const std::string trace = slurp(dir / "run_0.csv");
  CHECK(trace.rfind("k,stopping_error,consensus_max,phi,h_value,lyapunov,"
                    "prox_calls,grad_calls,elapsed_s\n", 0) == 0);
}

TEST_CASE("config snapshot reproduces the run byte for byte") {
  const fs::path first = fresh_dir("cs_first");
  const std::vector<std::string> flags = {
      "--problem", "cs", "--n", "64", "--rows", "0.25", "--sparsity", "0.05",
      "--transform", "dct", "--participation", "0.5", "--iters", "200",
      "--tol", "1e-9", "--repeats", "2", "--seed", "77",
      "--output", first.string()};
  REQUIRE(run_cli(flags) == kExitOk);

  const fs::path second = fresh_dir("cs_second");
  REQUIRE(run_cli({"--config", (first / "config.txt").string(),
                   "--output", second.string()}) == kExitOk);

  for (const char* name : {"run_0.csv", "run_1.csv", "aggregate.csv"})
    CHECK(slurp(first / name) == slurp(second / name));
  CHECK(fs::exists(first / "cs_instance.json"));
  CHECK(fs::exists(first / "recovered_0.csv"));
}

TEST_CASE("repeat invocations with one seed are byte-identical") {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  for (const fs::path& dir : {a, b}) {
    REQUIRE(run_cli({"--problem", "logistic", "--synthetic-samples", "120",
                     "--synthetic-features", "10", "--agents", "5",
                     "--participation", "0.4", "--iters", "50", "--tol", "1e-9",
                     "--seed", "31", "--output", dir.string()}) == kExitOk);
  }
  CHECK(slurp(a / "run_0.csv") == slurp(b / "run_0.csv"));
}

TEST_CASE("bad flags exit with the config error code") {
  CHECK(run_cli({"--problem", "nonsense"}) == kExitConfigError);
  CHECK(run_cli({}) == kExitConfigError);
  const fs::path dir = fresh_dir("badcfg");
  CHECK(run_cli({"--problem", "cs", "--n", "64", "--rows", "0.25",
                 "--gamma", "oops", "--output", dir.string()}) == kExitConfigError);
}

TEST_CASE("a malformed dataset exits with the parse error code") {
  const fs::path dir = fresh_dir("parse");
  const fs::path bad = dir / "bad.libsvm";
  std::ofstream(bad) << "+1 definitely-not-a-pair\n";
  CHECK(run_cli({"--problem", "logistic", "--data", bad.string(),
                 "--output", dir.string()}) == kExitParseError);
}

TEST_CASE("help exits cleanly") {
  CHECK(run_cli({"--help"}) == kExitOk);
}

TEST_CASE("eps-check writes an optimality report") {
  const fs::path dir = fresh_dir("epscheck");
  REQUIRE(run_cli({"--problem", "toy1d", "--iters", "2000", "--tol", "1e-12",
                   "--repeats", "3", "--eps-check", "1e-3",
                   "--output", dir.string()}) == kExitOk);
  REQUIRE(fs::exists(dir / "eps_report.json"));
  nlohmann::json report;
  std::ifstream(dir / "eps_report.json") >> report;
  CHECK(report["pass"].get<bool>());
  CHECK(report["objective_margin"].get<double>() <= 1e-3);
  CHECK(std::abs(report["phi_star"].get<double>() - 1.5) <= 1e-6);
}

TEST_CASE("format_double round-trips exactly") {
  using splitstoch::format_double;
  splitstoch::IterationRng rng(4242, 0);
  for (int trial = 0; trial < 5000; ++trial) {
    double x = (2.0 * rng.next_double() - 1.0) *
               std::pow(10.0, static_cast<double>(rng.next_below(40)) - 20.0);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.0) == "0");
}
