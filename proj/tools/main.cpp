#include <iostream>
#include <string>
#include <vector>

#include "hal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return hal::run_cli(args, std::cout, std::cerr);
}
