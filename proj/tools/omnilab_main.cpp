#include <iostream>
#include <string>
#include <vector>

#include "omnilab/cli/app.hpp"
#include "omnilab/numcore/alloc.hpp"

int main(int argc, char** argv) {
  omnilab::num::retain_freed_memory();
  std::vector<std::string> args(argv + 1, argv + argc);
  return omnilab::cli::dispatch(args, std::cout, std::cerr);
}
