#include <iostream>
#include <string>
#include <vector>

#include "ehnode/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ehnode::dispatch(args, std::cout, std::cerr);
}
