// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace mum {

/// Raised when operand shapes are incompatible. The message carries both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation's documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mum
