// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// The full run configuration and its JSON loader. Every section mirrors one
// module; unknown keys are rejected with the offending key and line.

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "swimlane/grpo.hpp"
#include "swimlane/placement.hpp"
#include "swimlane/policy.hpp"
#include "swimlane/toyenv.hpp"

namespace swimlane {

enum class RunMode : std::uint8_t { Sync, Async };

std::string_view to_string(RunMode m) noexcept;
RunMode parse_mode(std::string_view s);

inline constexpr std::uint32_t kUnboundedStaleness = std::numeric_limits<std::uint32_t>::max();

struct PlacementConfig {
  Strategy strategy = Strategy::Hybrid;
  std::uint32_t slots = 2;
  Ratio ratio;
  std::uint32_t nodes = 1;
  bool env_with_rollout = false;  // only meaningful for disaggregated plans
  LinkProfile link;               // intra-node Wire edges (data and control)
  LinkProfile inter_node;
};

struct RuntimeConfig {
  RunMode mode = RunMode::Async;
  std::uint64_t epochs = 20;
  std::uint32_t queue_capacity = 2;
  std::uint32_t staleness_limit = 1;  // kUnboundedStaleness disables the gate
  std::uint64_t seed = 0;
  bool virtual_time = true;
  std::uint32_t warmup_epochs = 1;
  double watchdog_s = 30.0;
  std::uint32_t max_consecutive_quarantine = 3;
  bool tcp_loopback = false;  // Wire data plane over a loopback socket
};

struct PoolConfig {
  std::uint64_t model_capacity = 0;  // 0: 4x param bytes plus optimizer state
  std::uint64_t env_capacity = 0;    // 0: 2x peak epoch scratch
  bool unified_baseline = false;
};

struct RunConfig {
  EnvConfig env;
  PolicyConfig policy;
  double infer_overhead_us = 0.0;   // per chunk inference, per rollout worker
  double infer_per_env_us = 0.0;    // per env per chunk inference
  GrpoConfig grpo;
  double train_overhead_us = 0.0;   // per update, per actor shard
  double train_per_transition_us = 0.0;
  PlacementConfig placement;
  RuntimeConfig runtime;
  PoolConfig pools;

  std::size_t n_groups() const noexcept { return grpo.group_size ? env.n_envs / grpo.group_size : 0; }
  PlacementPlan plan() const;
  Topology topology() const;
  // Cross-section consistency. Throws ConfigError.
  void validate() const;
  // Stable text of every field; equal fingerprints mean equal configs.
  std::string fingerprint() const;
};

// Parses and validates. `source` names the input in error messages. Throws
// ConfigError for unknown keys (naming key and line) and bad values.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::string& path);

}  // namespace swimlane
