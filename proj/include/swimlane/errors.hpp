// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace swimlane {

// Bad configuration values (layouts, ratios, capacities). CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected input data (non-finite params, wrong group sizes, schema violations).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: stepping a finished env, double free, dimension mismatch.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Runtime aborts (watchdog, staleness violation, poisoned update). CLI exit code 2.
class RuntimeAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered during an update; names the offending group.
class NonFiniteUpdate : public std::runtime_error {
 public:
  NonFiniteUpdate(std::uint64_t group_id, const std::string& what)
      : std::runtime_error(what), group_id_(group_id) {}
  std::uint64_t group_id() const noexcept { return group_id_; }

 private:
  std::uint64_t group_id_;
};

}  // namespace swimlane
