#include <iostream>

#include "bgrape/cli.hpp"

int main(int argc, char** argv) {
  return bgrape::run_cli(argc, argv, std::cout, std::cerr);
}
