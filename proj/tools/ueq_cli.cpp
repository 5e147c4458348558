#include <iostream>
#include <string>
#include <vector>

#include "ueq/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ueq::cli::run_cli(std::move(args), std::cout, std::cerr);
}
