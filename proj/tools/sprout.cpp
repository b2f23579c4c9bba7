#include <iostream>
#include <string>
#include <vector>

#include "sprout/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sprout::run_cli(args, std::cout, std::cerr);
}
