// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Churn workload comparing split model/env pools against one shared pool of
// the same total size. Model state is long-lived except for the weight
// snapshot, which is replaced every update; env scratch churns within an
// epoch and dies at its end.

#pragma once

#include <cstdint>
#include <string>

#include "swimlane/config.hpp"
#include "swimlane/memory_pool.hpp"

namespace swimlane {

struct MembenchConfig {
  std::uint64_t param_bytes = 1 << 16;
  std::uint64_t epochs = 50;
  std::uint64_t seed = 0;
  // 0 picks the defaults: model = params + f64 gradient + two moments + two
  // snapshot buffers (7x param bytes); env = the peak epoch scratch, which
  // the env pool always fits because scratch is freed in stack order.
  std::uint64_t model_capacity = 0;
  std::uint64_t env_capacity = 0;

  static MembenchConfig from(const RunConfig& cfg);
};

struct MembenchSide {
  PoolStats model;  // the shared pool for the unified side
  PoolStats env;    // unused for the unified side
  std::uint64_t model_failed = 0;  // failed model-state requests
  std::uint64_t env_failed = 0;
  // At the first failed model request (valid when model_failed > 0).
  std::uint64_t first_model_failure_epoch = 0;
  std::uint64_t total_free_at_failure = 0;
  std::uint64_t largest_free_at_failure = 0;
};

struct MembenchReport {
  MembenchConfig config;
  std::uint64_t model_capacity = 0;
  std::uint64_t env_capacity = 0;
  std::uint64_t peak_env_scratch = 0;
  MembenchSide dual;
  MembenchSide unified;
};

MembenchReport run_membench(const MembenchConfig& cfg);
std::string membench_json(const MembenchReport& r);

}  // namespace swimlane
