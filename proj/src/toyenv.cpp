// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/toyenv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "swimlane/busy.hpp"
#include "swimlane/errors.hpp"

namespace swimlane {

namespace {

constexpr std::uint64_t kInitialStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

float clamp_unit(float v) { return std::clamp(v, -1.0f, 1.0f); }

}  // namespace

void EnvConfig::validate() const {
  if (n_envs < 1) throw ConfigError("env.n_envs must be >= 1");
  if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (obs_dim < 4) throw ConfigError("env.obs_dim must be >= 4");
  if (act_dim != 2) throw ConfigError("env.act_dim must be 2");
  if (!(success_radius > 0.0)) throw ConfigError("env.success_radius must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("env.dt must be > 0");
  if (step_overhead_us < 0.0 || latency.ell0_us < 0.0 || latency.beta < 0.0 || !(latency.n0 > 0.0) ||
      !(latency.gamma > 0.0)) {
    throw ConfigError("env latency model values must be nonnegative (n0, gamma > 0)");
  }
}

double per_env_latency(std::size_t n, const LatencyModel& model) {
  const double excess = std::max(0.0, (static_cast<double>(n) - model.n0) / model.n0);
  if (excess == 0.0 || model.beta == 0.0) return model.ell0_us;
  return model.ell0_us * (1.0 + model.beta * std::pow(excess, model.gamma));
}

VecEnv::VecEnv(const EnvConfig& cfg, std::uint64_t seed, GroupLayout layout)
    : cfg_(cfg), layout_(layout), seed_(seed) {
  cfg_.validate();
  if (layout.n_groups * layout.group_size != cfg.n_envs) {
    throw ConfigError("group layout " + std::to_string(layout.n_groups) + "x" + std::to_string(layout.group_size) +
                      " does not cover n_envs=" + std::to_string(cfg.n_envs));
  }
  agent_.assign(2 * cfg_.n_envs, 0.0f);
  target_.assign(2 * cfg_.n_envs, 0.0f);
  t_.assign(cfg_.n_envs, 0);
  noise_.reserve(cfg_.n_envs);
  for (std::size_t e = 0; e < cfg_.n_envs; ++e) noise_.push_back(Rng::substream(seed_, {kNoiseStream, e}));
  obs_ = DenseVec(cfg_.n_envs * cfg_.obs_dim);
  draw_initials();
  emit_observation();
}

void VecEnv::draw_initials() {
  for (std::size_t g = 0; g < layout_.n_groups; ++g) {
    Rng rng = Rng::substream(seed_, {kInitialStream, episode_, g});
    const float ax = static_cast<float>(rng.uniform(-1.0, 1.0));
    const float ay = static_cast<float>(rng.uniform(-1.0, 1.0));
    const float tx = static_cast<float>(rng.uniform(-1.0, 1.0));
    const float ty = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (std::size_t k = 0; k < layout_.group_size; ++k) {
      const std::size_t e = g * layout_.group_size + k;
      agent_[2 * e] = ax;
      agent_[2 * e + 1] = ay;
      target_[2 * e] = tx;
      target_[2 * e + 1] = ty;
      t_[e] = 0;
    }
  }
}

void VecEnv::emit_observation() {
  const std::size_t d = cfg_.obs_dim;
  for (std::size_t e = 0; e < cfg_.n_envs; ++e) {
    float* o = obs_.data() + e * d;
    o[0] = agent_[2 * e];
    o[1] = agent_[2 * e + 1];
    o[2] = target_[2 * e];
    o[3] = target_[2 * e + 1];
    for (std::size_t j = 4; j < d; ++j) o[j] = static_cast<float>(noise_[e].normal());
  }
}

EnvStepResult VecEnv::step(std::span<const float> actions, std::size_t chunk) {
  const std::size_t a = cfg_.act_dim;
  if (chunk < 1 || actions.size() != cfg_.n_envs * chunk * a) {
    throw UsageError("env_step: expected " + std::to_string(cfg_.n_envs * chunk * a) + " action values, got " +
                     std::to_string(actions.size()));
  }
  for (std::size_t e = 0; e < cfg_.n_envs; ++e) {
    if (done(e)) throw UsageError("env_step: env " + std::to_string(e) + " is done; call next_episode() first");
  }

  EnvStepResult res;
  res.done.assign(cfg_.n_envs, 0);
  res.env_cost_us.assign(cfg_.n_envs, 0.0);
  const double ell = per_env_latency(cfg_.n_envs, cfg_.latency);
  const float dt = static_cast<float>(cfg_.dt);
  for (std::size_t e = 0; e < cfg_.n_envs; ++e) {
    const std::size_t applied = std::min(chunk, cfg_.horizon - t_[e]);
    const float* act = actions.data() + e * chunk * a;
    for (std::size_t s = 0; s < applied; ++s) {
      agent_[2 * e] = clamp_unit(agent_[2 * e] + clamp_unit(act[s * a]) * dt);
      agent_[2 * e + 1] = clamp_unit(agent_[2 * e + 1] + clamp_unit(act[s * a + 1]) * dt);
    }
    t_[e] += applied;
    res.applied_substeps = std::max(res.applied_substeps, applied);
    res.env_cost_us[e] = static_cast<double>(applied) * ell;
    res.total_cost_us += res.env_cost_us[e];
    res.done[e] = done(e) ? 1 : 0;
  }
  res.total_cost_us += static_cast<double>(res.applied_substeps) * cfg_.step_overhead_us;
  if (busy_) BusyCompute::instance().spin_us(res.total_cost_us);
  emit_observation();
  res.obs = obs_;
  return res;
}

std::vector<float> VecEnv::episode_outcome() const {
  std::vector<float> out(cfg_.n_envs, 0.0f);
  const double r = cfg_.success_radius;
  for (std::size_t e = 0; e < cfg_.n_envs; ++e) {
    if (!done(e)) throw UsageError("episode_outcome: env " + std::to_string(e) + " has not reached the horizon");
    const double dx = static_cast<double>(agent_[2 * e]) - target_[2 * e];
    const double dy = static_cast<double>(agent_[2 * e + 1]) - target_[2 * e + 1];
    out[e] = (std::hypot(dx, dy) < r) ? 1.0f : 0.0f;
  }
  return out;
}

void VecEnv::next_episode() {
  ++episode_;
  draw_initials();
  emit_observation();
}

}  // namespace swimlane
