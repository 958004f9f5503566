#include <iostream>
#include <string>
#include <vector>

#include "re2gec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return re2gec::cli::dispatch(args, std::cout, std::cerr);
}
