#include <cstdio>
#include <exception>

#include "zono/cli.hpp"

int main(int argc, char** argv) {
  try {
    return zono::cli::run(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
