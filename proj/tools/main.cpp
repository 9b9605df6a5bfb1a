#include <string>
#include <vector>

#include "sddd/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sddd::run_cli(args);
}
