#include <iostream>
#include <string>
#include <vector>

#include "cli/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return langsup::cli::run(args, std::cout, std::cerr);
}
