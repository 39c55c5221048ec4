#include <string>
#include <vector>

#include "vasim/cli.hpp"

int main(int argc, char** argv) {
  return vasim::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
