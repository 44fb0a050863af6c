#include <iostream>
#include <string>
#include <vector>

#include "fusionbiopsy/cli.hpp"

int main(int argc, char** argv) {
  return fusionbiopsy::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
