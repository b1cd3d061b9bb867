#include "splitstoch/experiment.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return splitstoch::run_experiment(args);
}
