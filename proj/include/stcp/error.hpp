// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace stcp {

// A session token was consumed twice, or an operation ran on a spent token.
class linearity_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A shape failed validation (unguarded recursion, unbound reference, bad arity).
class shape_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A TCB operation was invoked in a state that does not permit it.
class state_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The peer (or the local user role) stepped outside the session type.
// Aborts the session; not modeled as a typed branch.
class protocol_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level failure: endpoint closed, queue torn down, socket error.
class channel_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad runtime configuration (CLI flags, scenario files, backend setup).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stcp
