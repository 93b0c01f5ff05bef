#include <iostream>

#include "cropref/cli.hpp"

int main(int argc, char** argv) {
  return cropref::cli::run_cli(argc, argv, std::cout, std::cerr);
}
