// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Vectorized "reach the target" environment. Each env moves a point agent
// in the box [-1,1]^2 and earns a binary outcome reward at the end of a
// fixed horizon. Envs are arranged in groups that share initial conditions,
// which is what group-relative advantages need.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swimlane/tensor.hpp"

namespace swimlane {

struct LatencyModel {
  double ell0_us = 0.0;  // per-env per-substep cost below saturation
  double n0 = 768.0;     // saturation env count
  double beta = 0.0;
  double gamma = 1.0;
};

struct EnvConfig {
  std::size_t n_envs = 64;
  std::size_t horizon = 16;
  std::size_t obs_dim = 4;
  std::size_t act_dim = 2;
  double dt = 0.1;
  double success_radius = 0.1;
  // Fixed cost of one vectorized substep regardless of env count.
  double step_overhead_us = 0.0;
  LatencyModel latency;

  // Throws ConfigError.
  void validate() const;
};

struct GroupLayout {
  std::size_t n_groups = 1;
  std::size_t group_size = 1;
};

// l(n) = ell0 * (1 + beta * max(0, (n - n0) / n0)^gamma)
double per_env_latency(std::size_t n, const LatencyModel& model);

struct EnvStepResult {
  DenseVec obs;                     // n_envs * obs_dim
  std::vector<std::uint8_t> done;   // per env
  std::vector<double> env_cost_us;  // applied_substeps * l(n_envs), per env
  std::size_t applied_substeps = 0;
  double total_cost_us = 0.0;       // sum of env costs + per-substep overhead
};

class VecEnv {
 public:
  // env_reset. Throws ConfigError when n_groups * group_size != n_envs.
  VecEnv(const EnvConfig& cfg, std::uint64_t seed, GroupLayout layout);

  const EnvConfig& config() const noexcept { return cfg_; }
  const GroupLayout& layout() const noexcept { return layout_; }

  // Observation emitted by the last reset or step.
  const DenseVec& observation() const noexcept { return obs_; }

  // `actions` holds chunk * act_dim values per env, env-major. Components are
  // clamped to [-1,1]; the chunk is truncated at the horizon. Throws
  // UsageError when any env is already done or the size is wrong.
  EnvStepResult step(std::span<const float> actions, std::size_t chunk);

  // Outcome reward per env: 1 iff distance < success_radius (strict).
  // Throws UsageError before the horizon.
  std::vector<float> episode_outcome() const;

  // Auto-reset after the outcome: fresh group initials from the episode
  // substream, t = 0.
  void next_episode();

  // Consumes the synthetic cost as calibrated busy-compute inside step().
  void set_busy_compute(bool on) noexcept { busy_ = on; }

  std::size_t t(std::size_t env) const { return t_[env]; }
  bool done(std::size_t env) const { return t_[env] >= cfg_.horizon; }
  std::span<const float> agent_pos(std::size_t env) const { return {&agent_[2 * env], 2}; }
  std::span<const float> target_pos(std::size_t env) const { return {&target_[2 * env], 2}; }
  std::uint64_t episode_index() const noexcept { return episode_; }

 private:
  void draw_initials();
  void emit_observation();

  EnvConfig cfg_;
  GroupLayout layout_;
  std::uint64_t seed_;
  std::uint64_t episode_ = 0;
  std::vector<float> agent_;
  std::vector<float> target_;
  std::vector<std::size_t> t_;
  std::vector<Rng> noise_;
  DenseVec obs_;
  bool busy_ = false;
};

}  // namespace swimlane
