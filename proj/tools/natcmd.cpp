#include <iostream>
#include <string>
#include <vector>

#include "natcmd/cli.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  std::vector<std::string> args(argv + 1, argv + argc);
  return natcmd::run_cli(args, std::cout, std::cerr);
}
