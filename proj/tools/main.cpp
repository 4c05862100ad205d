#include <iostream>

#include "btpredict/cli.hpp"

int main(int argc, char** argv) {
  return btp::run_cli(argc, argv, std::cout, std::cerr);
}
