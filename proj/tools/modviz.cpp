#include <iostream>

#include "modviz/cli/commands.hpp"
#include "modviz/common/runtime.hpp"

int main(int argc, char** argv) {
  modviz::tune_allocator();
  return modviz::cli::main_entry(argc, argv, std::cout, std::cerr);
}
