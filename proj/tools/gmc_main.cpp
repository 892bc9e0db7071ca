#include <vector>
#include <string>

#include "gmcborrow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gmc::cli_dispatch(std::move(args));
}
