// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace spdr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. `args` excludes the program name:
///   <subcommand> [--config=FILE] [--section.key=value ...]
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

std::string usage();

std::string sha256_hex(std::string_view bytes);

/// Applies the SPDR_LOG environment variable (trace, debug, info, warn,
/// error, off; default info) to the process-wide logger.
void configure_logging();

}  // namespace spdr::cli
