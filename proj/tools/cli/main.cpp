// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <string>
#include <vector>

#include "run.hpp"

int main(int argc, char** argv) {
  spdr::cli::configure_logging();
  const std::vector<std::string> args(argv + 1, argv + argc);
  return spdr::cli::run(args, std::cout, std::cerr);
}
