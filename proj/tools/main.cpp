#include <iostream>
#include <string>
#include <vector>

#include "elsa/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elsa::pipeline::run_cli(args, std::cout, std::cerr);
}
