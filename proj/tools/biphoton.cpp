#include <biphoton/cli.hpp>

int main(int argc, char** argv) {
  return biphoton::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
