// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/cost_model.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "swimlane/busy.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/wire.hpp"

namespace swimlane {

namespace {

double round_ns(double us) { return std::round(us * 1000.0); }

}  // namespace

double inference_cost_us(const RunConfig& cfg, std::size_t m) {
  return cfg.infer_overhead_us + static_cast<double>(m) * cfg.infer_per_env_us;
}

double allreduce_ns(std::uint64_t bytes, std::uint32_t nodes, const LinkProfile& link) {
  if (nodes <= 1) return 0.0;
  const double n = nodes;
  double ns = 2.0 * (n - 1.0) * static_cast<double>(link.latency_ns);
  if (link.bandwidth_Bps != 0) ns += 2.0 * (n - 1.0) / n * static_cast<double>(bytes) * 1e9 / link.bandwidth_Bps;
  return std::round(ns);
}

StageCosts stage_costs(const RunConfig& cfg) {
  const PlacementPlan plan = cfg.plan();
  StageCosts c;
  c.rollout_workers = plan.rollout_slots;
  c.actor_shards = plan.actor_slots;
  c.nodes = cfg.placement.nodes;
  c.colocated = plan.strategy == Strategy::Colocated;
  const std::size_t n_groups = cfg.n_groups();
  if (n_groups % c.rollout_workers != 0 || n_groups % c.actor_shards != 0) {
    throw ConfigError(fmt::format("{} groups do not divide across {} rollout workers and {} actor shards", n_groups,
                                  c.rollout_workers, c.actor_shards));
  }
  const std::size_t m = cfg.env.n_envs / c.rollout_workers;
  c.envs_per_worker = m;
  const std::size_t H = cfg.env.horizon;
  const std::size_t chunk = cfg.policy.chunk;
  const std::size_t nc = (H + chunk - 1) / chunk;
  c.batch_transitions = cfg.env.n_envs * H;
  c.traj_bytes = trajectory_batch_wire_size(n_groups, cfg.grpo.group_size, H, chunk, cfg.env.obs_dim, kActDim);
  c.weight_frame_bytes = weight_snapshot_wire_size(cfg.policy.param_count());
  c.data_transport = plan.transport(Component::Rollout, Component::Actor);
  c.control_transport = plan.transport(Component::Actor, Component::Rollout);

  const double env_us = static_cast<double>(H) *
                        (cfg.env.step_overhead_us + static_cast<double>(m) * per_env_latency(m, cfg.env.latency));
  const double infer_us = static_cast<double>(nc) * inference_cost_us(cfg, m);
  if (plan.transport(Component::Env, Component::Rollout) == TransportMode::Wire) {
    // Observations out and actions back, once per chunk.
    const std::uint64_t obs_bytes = m * cfg.env.obs_dim * 4;
    const std::uint64_t act_bytes = m * chunk * kActDim * 4;
    c.env_link_ns = static_cast<double>(nc) * static_cast<double>(cfg.placement.link.delay_ns(obs_bytes) +
                                                                  cfg.placement.link.delay_ns(act_bytes));
  }
  c.rollout_ns = round_ns(env_us + infer_us) + c.env_link_ns;

  const double per_shard = static_cast<double>(c.batch_transitions) / c.actor_shards;
  c.allreduce_ns = allreduce_ns(4 * cfg.policy.param_count(), c.nodes, cfg.placement.inter_node);
  c.actor_ns = round_ns(cfg.train_overhead_us + per_shard * cfg.train_per_transition_us) + c.allreduce_ns;

  if (c.data_transport == TransportMode::Wire) c.transfer_ns = static_cast<double>(cfg.placement.link.delay_ns(c.traj_bytes));
  if (c.control_transport == TransportMode::Wire) {
    c.broadcast_ns = static_cast<double>(cfg.placement.link.latency_ns +
                                         c.rollout_workers * cfg.placement.link.occupancy_ns(c.weight_frame_bytes));
  }
  return c;
}

std::uint64_t spin_iterations(std::uint64_t iterations) {
  std::uint64_t x = 0x9E3779B97F4A7C15ull;
  for (std::uint64_t i = 0; i < iterations; ++i) {
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ull;
    x += i;
  }
  return x;
}

namespace {
volatile std::uint64_t g_sink = 0;
}  // namespace

BusyCompute::BusyCompute() {
  using clock = std::chrono::steady_clock;
  std::uint64_t iters = 1 << 16;
  double best = 0.0;
  // Best of a few rounds: the fastest round is the least disturbed one.
  for (int round = 0; round < 5; ++round) {
    const auto t0 = clock::now();
    g_sink = spin_iterations(iters);
    const double us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    if (us < 2000.0) {
      iters *= 4;
      --round;
      continue;
    }
    best = std::max(best, static_cast<double>(iters) / us);
  }
  iters_per_us_ = best;
}

BusyCompute& BusyCompute::instance() {
  static BusyCompute calibrated;
  return calibrated;
}

void BusyCompute::spin_us(double microseconds) const {
  if (microseconds <= 0.0) return;
  g_sink = spin_iterations(static_cast<std::uint64_t>(microseconds * iters_per_us_));
}

}  // namespace swimlane
