#include "ultraclean/cli/commands.hpp"

int main(int argc, char** argv) {
  return ultraclean::cli::run(std::vector<std::string>(argv, argv + argc));
}
