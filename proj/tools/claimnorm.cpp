#include <iostream>

#include "claimnorm/cli.hpp"

extern char** environ;

int main(int argc, char** argv) {
  return claimnorm::cli::run_command(argc, argv, environ, std::cout, std::cerr);
}
