// SPDX-License-Identifier: Apache-2.0
#include <csignal>
#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { asd::cli::request_interrupt(); });
  std::signal(SIGTERM, [](int) { asd::cli::request_interrupt(); });
  return asd::cli::run(argc, argv, std::cout, std::cerr);
}
