#include <iostream>
#include <string>
#include <vector>

#include "h0meta/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return h0meta::cli_main(args, std::cout, std::cerr);
}
