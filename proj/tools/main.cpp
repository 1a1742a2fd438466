#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return logicrec::cli::run(args, std::cin, std::cout, std::cerr);
}
