// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Group Relative Policy Optimization for the chunked Gaussian policy:
// group-normalized advantages, the clipped ratio objective, micro-batched
// gradient accumulation and an Adam optimizer.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swimlane/policy.hpp"

namespace swimlane {

// One rollout of a group member. Per chunk: the observation at chunk start,
// the full sampled chunk (including substeps truncated at the horizon) and
// the behavior log-density of that chunk.
struct Trajectory {
  float reward = 0.0f;
  std::uint64_t behavior_version = 0;
  std::vector<float> obs;                // n_chunks * obs_dim
  std::vector<float> actions;            // n_chunks * chunk * act_dim
  std::vector<float> behavior_log_prob;  // n_chunks
  // Only filled for substep ratio granularity; never crosses the wire.
  std::vector<float> behavior_substep_log_prob;  // n_chunks * chunk

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct GroupBatch {
  std::uint64_t group_id = 0;
  std::uint32_t horizon = 0;
  std::uint32_t chunk = 0;
  std::uint32_t obs_dim = 0;
  std::uint32_t act_dim = 0;
  std::vector<Trajectory> trajectories;

  std::size_t n_chunks() const noexcept { return chunk == 0 ? 0 : (horizon + chunk - 1) / chunk; }
  std::size_t transitions() const noexcept { return trajectories.size() * horizon; }
  // Throws ValidationError on inconsistent sizes or mixed behavior versions.
  void validate() const;

  friend bool operator==(const GroupBatch&, const GroupBatch&) = default;
};

enum class RatioGranularity { Chunk, Substep };

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double adv_epsilon = 1e-8;
  std::size_t micro_batch = 8;  // trajectories per accumulation slice
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double opt_eps = 1e-8;
  double max_grad_norm = 0.0;  // <= 0 disables clipping
  double kl_coef = 0.0;        // k3 penalty against the behavior policy; off by default
  RatioGranularity granularity = RatioGranularity::Chunk;

  void validate() const;
};

// A_i = (r_i - mean) / (popstd + delta); all zeros when every reward is equal.
// Throws ValidationError when the batch does not hold exactly `group_size`
// trajectories.
std::vector<double> compute_advantages(const GroupBatch& batch, std::size_t group_size, double delta);

struct SurrogateTerm {
  double loss = 0.0;
  double dloss_dratio = 0.0;
  bool clipped = false;
};

// -min(rho*A, clip(rho, 1-eps, 1+eps)*A). Ties take the unclipped derivative.
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_eps);

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f), 0}; }
};

// Bias-corrected Adam, 64-bit arithmetic per element.
void adam_step(std::span<float> params, std::span<const float> grad, AdamState& state, const GrpoConfig& cfg);

// Per-worker gradient of the mean clipped objective over its shard of groups.
struct GradientShard {
  std::vector<double> grad;
  double loss = 0.0;        // mean over terms
  double ratio_sum = 0.0;
  std::size_t clipped = 0;
  std::size_t terms = 0;
  std::size_t trajectories = 0;
  std::size_t groups = 0;
  double reward_sum = 0.0;
};

// Groups are processed by ascending group_id, then trajectory index, in
// slices of cfg.micro_batch trajectories. Throws NonFiniteUpdate naming the
// first offending group.
GradientShard grpo_gradient(const PolicyParams& params, std::span<const GroupBatch> batches, const GrpoConfig& cfg);

// Sums shard gradients in rank order (64-bit) and divides by the world size.
GradientShard reduce_shards(std::span<const GradientShard> shards);

struct UpdateStats {
  std::uint64_t version = 0;  // version after the step
  double loss = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t groups = 0;
  std::size_t trajectories = 0;
  double mean_reward = 0.0;
};

// Optional global-norm clip, then one Adam step on the flattened params.
UpdateStats apply_gradient(PolicyParams& params, const GradientShard& reduced, AdamState& state,
                           const GrpoConfig& cfg, std::uint64_t new_version);

// Single-worker convenience: gradient, step, version + 1.
UpdateStats grpo_update(PolicyParams& params, std::span<const GroupBatch> batches, const GrpoConfig& cfg,
                        AdamState& state, std::uint64_t current_version);

}  // namespace swimlane
