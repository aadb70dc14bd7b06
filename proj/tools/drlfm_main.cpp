#include <vector>

#include "drlfm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return drlfm::run_cli(args);
}
