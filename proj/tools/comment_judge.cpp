#include <string>
#include <vector>

#include "comment_judge/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return comment_judge::cli::run_cli(args);
}
