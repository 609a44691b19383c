#include <string>
#include <vector>

#include "hsad/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hsad::cli::dispatch(args);
}
