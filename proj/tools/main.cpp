#include <string>
#include <vector>

#include "osr/experiments.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return osr::run_cli(args);
}
