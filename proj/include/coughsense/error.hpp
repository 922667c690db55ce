// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace coughsense {

/// Bad user-supplied data: malformed files, invalid arguments, too-short input.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor / matrix dimension mismatch.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or infinity showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serialized artifact is unreadable (truncated, bad magic, bad version, ...).
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace coughsense
