#include <string>
#include <vector>

#include "rism/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rism::cli::run(args);
}
