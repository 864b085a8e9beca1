// SPDX-License-Identifier: Apache-2.0
#include <csignal>
#include <iostream>

#include "fkb/cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { fkb::cli::request_stop(); });
  std::signal(SIGTERM, [](int) { fkb::cli::request_stop(); });
  std::vector<std::string> args(argv + 1, argv + argc);
  return fkb::cli::run(args, std::cin, std::cout, std::cerr);
}
