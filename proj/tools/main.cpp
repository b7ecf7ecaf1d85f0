#include <string>
#include <vector>

#include "marketrank/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return marketrank::run_command(args);
}
