// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "sgn/cli.hpp"
#include "sgn/tensor.hpp"

int main(int argc, char** argv) {
  sgn::keep_freed_memory();
  return sgn::run_cli(argc, argv, std::cout, std::cerr);
}
