#include <iostream>

#include "pie/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pie::cli::run(args, std::cout, std::cerr);
}
