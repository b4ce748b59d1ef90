#include <iostream>
#include <string>
#include <vector>

#include "binseg/cli.hpp"

int main(int argc, char** argv) {
  return binseg::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
