#include <iostream>

#include "kamlin/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kamlin::cli_run(args, std::cout, std::cerr);
}
