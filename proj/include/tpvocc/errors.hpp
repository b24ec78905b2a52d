// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tpvocc {

// Incompatible tensor shapes or argument counts passed to an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, truncated or inconsistent data files (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite value was produced (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step = -1)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace tpvocc
