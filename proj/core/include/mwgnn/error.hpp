// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mwgnn {

/// Caller supplied something that violates a documented precondition
/// (bad shape, out-of-range id, infeasible configuration).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN/Inf or failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked in the wrong state (backward twice, step before backward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or unreadable input/output file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mwgnn
