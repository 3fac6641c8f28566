// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace spdr {

/// Raised for malformed inputs, violated invariants and numeric failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid invocations: bad configuration keys, bad flag values.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spdr
