#include <iostream>

#include "patchsel/cli/cli.hpp"
#include "patchsel/runtime.hpp"

int main(int argc, char** argv) {
  patchsel::configure_allocator();
  return patchsel::cli::cli_main(argc, argv, std::cout, std::cerr);
}
