// Regenerates the bundled data/ directory.
#include <iostream>

#include "dcs/fixtures.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_fixtures <data-dir>\n";
    return 2;
  }
  try {
    dcs::fixtures::write_fixtures(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
