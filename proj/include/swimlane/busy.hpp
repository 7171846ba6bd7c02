// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace swimlane {

// Calibrated arithmetic spin. Unlike a deadline spin, the work is a fixed
// number of loop iterations, so two spinners sharing a core each take
// longer: colocated components see real CPU contention.
class BusyCompute {
 public:
  // Calibrates once per process (about 30 ms) on first use.
  static BusyCompute& instance();

  void spin_us(double microseconds) const;
  double iterations_per_us() const noexcept { return iters_per_us_; }

 private:
  BusyCompute();
  double iters_per_us_ = 0.0;
};

// Runs `iterations` rounds of a dependent integer hash; returns the result
// so the loop cannot be elided.
std::uint64_t spin_iterations(std::uint64_t iterations);

}  // namespace swimlane
