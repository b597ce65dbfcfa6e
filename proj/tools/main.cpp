#include <iostream>
#include <string>
#include <vector>

#include "rieszlat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rieszlat::cli::run(args, std::cout, std::cerr);
}
