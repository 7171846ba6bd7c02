// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event model of the pipeline. The four lanes reduce to two compute
// stages (rollout including inference, actor) and two communication side
// channels (trajectory transfer, weight broadcast). The staleness gate, the
// bounded queue and the weight mailbox follow the live runtime's rules, and
// both sides take their costs from stage_costs().
//
// Compute stages run on processor-sharing resources: in a colocated plan
// rollout and actor share one, so overlapping jobs each progress at half
// speed. Synchronous mode is the same machine with staleness limit 0.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swimlane/config.hpp"
#include "swimlane/cost_model.hpp"

namespace swimlane {

enum class Bottleneck : std::uint8_t { Rollout, Actor, Transfer };
std::string_view to_string(Bottleneck b) noexcept;

// Per-epoch event times in nanoseconds of simulated time.
struct SimEpoch {
  std::uint64_t epoch = 0;
  double start = 0;        // rollout begins
  double rollout_end = 0;
  double push = 0;         // queue token acquired, handed to the link
  double arrival = 0;      // reached the trainer side
  double train_start = 0;
  double train_end = 0;    // version epoch+1 committed
  double version_avail = 0;  // version epoch+1 visible to the sampler
  std::uint64_t behavior_version = 0;
  std::uint64_t trainer_version_at_start = 0;
};

struct SimResult {
  RunMode mode = RunMode::Async;
  std::string fingerprint;
  std::uint64_t n_envs = 0;
  Strategy strategy = Strategy::Hybrid;
  Ratio ratio;
  std::uint32_t nodes = 1;

  double throughput = 0.0;  // transitions per second, all nodes
  double step_time = 0.0;   // seconds, post-warmup average
  double rollout_time = 0.0;
  double actor_time = 0.0;
  double transfer_time = 0.0;
  double broadcast_time = 0.0;
  double wall_time = 0.0;   // post-warmup window
  std::uint64_t transitions = 0;  // post-warmup, all nodes
  double sampler_occupancy = 0.0;
  double trainer_occupancy = 0.0;
  Bottleneck bottleneck = Bottleneck::Rollout;
  std::uint64_t max_staleness = 0;  // trainer - behavior version at rollout start
  StageCosts costs;
  std::vector<SimEpoch> timeline;
};

// Throws ConfigError on an inconsistent config or when epochs <= warmup.
SimResult simulate(const RunConfig& cfg, RunMode mode, std::uint64_t epochs);

// One simulate() per count with env.n_envs replaced. Counts must ascend.
std::vector<SimResult> sweep_envs(const RunConfig& cfg, std::span<const std::size_t> env_counts);
std::string sweep_csv(std::span<const SimResult> curve);

// Closed-form steady-state oracle: batch / max(rollout, actor).
double pipeline_oracle_throughput(const SimResult& r);

// Aggregate of a live run, as compared against a simulation.
struct StageAggregate {
  RunMode mode = RunMode::Async;
  std::string fingerprint;
  double throughput = 0.0;
  double step_time = 0.0;
  double rollout_time = 0.0;
  double actor_time = 0.0;
  double transfer_time = 0.0;
};

struct FitReport {
  double throughput_dev = 0.0;
  double step_dev = 0.0;
  double rollout_dev = 0.0;
  double actor_dev = 0.0;
  double transfer_dev = 0.0;
  double max_dev = 0.0;
  double threshold = 0.10;
  bool pass = false;
};

// Relative deviations. ValidationError when the configs or modes differ.
FitReport fit_check(const SimResult& sim, const StageAggregate& live, double threshold = 0.10);

}  // namespace swimlane
