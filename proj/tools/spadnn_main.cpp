#include <iostream>
#include <string>
#include <vector>

#include "spadnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spadnn::run_cli(args, std::cout, std::cerr);
}
