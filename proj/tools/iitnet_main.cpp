#include <iostream>
#include <string>
#include <vector>

#include "iitnet/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return iitnet::cli::run(std::move(args), std::cout, std::cerr);
}
