#include <iostream>
#include <string>
#include <vector>

#include "dsr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dsr::RunCli(args, std::cout, std::cerr);
}
