// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four-lane execution engine and the synchronous baseline.
//
//   Lane A  sampler        rolls out fixed-horizon epochs on its installed snapshot
//   Lane B  weight receive  moves broadcast snapshots into the install slot
//   Lane C  trainer        consumes epoch batches, data-parallel GRPO update
//   Lane D  weight dist.   broadcasts each new version on the control plane
//
// Shared state between lanes is limited to immutable snapshots, the bounded
// data channel, the weight mailboxes and the staleness gate.
//
// Virtual-time runs account stage costs on per-lane clocks instead of
// spinning; version selection then depends only on those clocks, so the run
// is reproducible. Busy-compute runs spin the synthetic costs and measure
// wall time.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "swimlane/config.hpp"
#include "swimlane/des.hpp"
#include "swimlane/memory_pool.hpp"
#include "swimlane/wire.hpp"

namespace swimlane {

enum class LaneId : std::uint8_t { Sampler, WeightRecv, Trainer, WeightDist };
inline constexpr std::size_t kLaneCount = 4;
std::string_view to_string(LaneId l) noexcept;

struct EpochReport {
  std::uint64_t epoch = 0;
  std::uint32_t node = 0;
  // Event times in seconds since run start (virtual or wall clock).
  double start = 0, rollout_end = 0, push = 0, arrival = 0, train_start = 0, train_end = 0;
  double rollout_time = 0, actor_time = 0, transfer_time = 0, step_time = 0;
  double broadcast_time = 0;
  std::uint64_t transitions = 0;
  std::uint64_t behavior_version = 0;
  std::uint64_t version_after = 0;
  // Trainer version minus behavior version: when the rollout began, and
  // when the batch was consumed (an upper bound on every chunk inference).
  std::uint64_t inference_staleness = 0;
  std::uint64_t consumption_staleness = 0;
  double mean_reward = 0;
  bool quarantined = false;
  UpdateStats update;
  PoolStats env_pool;
  PoolStats model_pool;
};

struct TransportTotals {
  std::uint64_t data_copies = 0;
  std::uint64_t data_bytes = 0;
  std::uint64_t control_copies = 0;
  std::uint64_t control_bytes = 0;
  std::uint64_t inter_node_data_bytes = 0;
  std::uint64_t inter_node_control_bytes = 0;
};

struct RunResult {
  RunMode mode = RunMode::Async;
  bool virtual_time = true;
  std::string fingerprint;
  std::uint32_t nodes = 1;
  std::uint32_t staleness_limit = 0;
  std::vector<EpochReport> epochs;  // node 0, one per rollout epoch
  PolicyParams final_params;
  std::uint64_t final_version = 0;
  // [node][version] parameter hashes; index 0 is the initial snapshot.
  std::vector<std::vector<std::uint64_t>> param_hashes;
  std::vector<DenseVec> version_params;  // node 0, only with keep_version_params
  std::uint64_t quarantined = 0;
  std::uint64_t transitions_produced = 0;  // all nodes
  std::uint64_t transitions_consumed = 0;  // all nodes, excluding quarantined
  std::uint64_t max_inference_staleness = 0;
  std::uint64_t max_consumption_staleness = 0;
  TransportTotals transport;
  double wall_time = 0;  // seconds of real time for the whole run
};

struct RunOptions {
  // Called by the trainer with the epoch's groups before the update.
  std::function<void(std::uint32_t node, std::uint64_t epoch, std::vector<GroupBatch>&)> on_batch;
  // Called by a lane before it handles `epoch`; tests use it to stall lanes.
  std::function<void(LaneId, std::uint32_t node, std::uint64_t epoch)> on_lane;
  bool keep_version_params = false;
};

// Runs `epochs` rollout epochs. Throws ConfigError for an invalid config and
// RuntimeAbort (naming lane and epoch) for watchdog timeouts, staleness
// violations and repeated poisoned updates.
RunResult run(const RunConfig& cfg, RunMode mode, std::uint64_t epochs, const RunOptions& options = {});

// Post-warmup aggregate in the simulator's terms.
StageAggregate aggregate(const RunResult& r, std::uint32_t warmup);

struct BubbleStats {
  std::array<double, kLaneCount> idle_fraction{};  // indexed by LaneId
  double sampler_bubble = 0;                      // == idle_fraction[Sampler]
  double wall_time = 0;
  bool warmup_dominated = false;  // fewer than two post-warmup epochs
};

BubbleStats barrier_free_handoff_audit(const RunResult& r, std::uint32_t warmup);

}  // namespace swimlane
