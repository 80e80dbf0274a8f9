#include <vector>

#include "zpd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zpd::cli::run(args);
}
