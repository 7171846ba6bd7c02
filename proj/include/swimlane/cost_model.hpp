// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic stage costs shared by the simulator and the live runtime's
// virtual-time mode, so both sides account identically.
//
//   rollout  = n_chunks * (infer_overhead + m * infer_per_env)
//            + horizon  * (step_overhead + m * l(m))        [+ env link]
//   actor    = train_overhead + (n_envs * horizon / A) * train_per_transition
//            [+ ring all-reduce over the inter-node link]
//   transfer = link delay of one epoch batch when rollout->actor is Wire
//   broadcast= W weight frames through the control link when Wire
//
// m = envs per rollout worker, A = actor shards, W = rollout workers.
// Every stage is rounded to whole nanoseconds.

#pragma once

#include <cstdint>

#include "swimlane/config.hpp"

namespace swimlane {

struct StageCosts {
  std::uint32_t rollout_workers = 1;
  std::uint32_t actor_shards = 1;
  std::uint32_t nodes = 1;
  std::uint64_t envs_per_worker = 0;
  std::uint64_t batch_transitions = 0;  // per node per epoch
  std::uint64_t traj_bytes = 0;         // wire size of one node's epoch batch
  std::uint64_t weight_frame_bytes = 0;
  TransportMode data_transport = TransportMode::InProc;
  TransportMode control_transport = TransportMode::InProc;
  bool colocated = false;

  double rollout_ns = 0.0;  // uncontended
  double actor_ns = 0.0;    // uncontended, includes all-reduce
  double allreduce_ns = 0.0;
  double env_link_ns = 0.0;  // included in rollout_ns
  double transfer_ns = 0.0;
  double broadcast_ns = 0.0;
};

// Throws ConfigError when the layout does not divide across workers.
StageCosts stage_costs(const RunConfig& cfg);

// Cost of one chunk inference for `m` envs, in microseconds.
double inference_cost_us(const RunConfig& cfg, std::size_t m);

// Ring all-reduce of `bytes` over `nodes` peers: 2(N-1)/N * bytes / bw
// plus 2(N-1) link latencies. Zero for a single node.
double allreduce_ns(std::uint64_t bytes, std::uint32_t nodes, const LinkProfile& link);

}  // namespace swimlane
