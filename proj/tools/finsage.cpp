#include <iostream>
#include <string>
#include <vector>

#include "finsage/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return finsage::run_cli(args, std::cout, std::cerr);
}
