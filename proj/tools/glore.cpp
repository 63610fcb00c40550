#include <iostream>
#include <string>
#include <vector>

#include "glore/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return glore::dispatch(args, std::cout, std::cerr);
}
