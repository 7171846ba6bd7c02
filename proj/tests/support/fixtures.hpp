// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "swimlane/grpo.hpp"
#include "swimlane/policy.hpp"
#include "swimlane/tensor.hpp"
#include "swimlane/wire.hpp"

namespace fixture {

// A random, shape-consistent trajectory batch.
inline swimlane::TrajectoryBatchMsg random_batch(swimlane::Rng& rng, std::uint16_t producer = 0) {
  using namespace swimlane;
  TrajectoryBatchMsg m;
  m.policy_version = rng.next_u64() % 1000;
  const std::size_t groups = rng.next_u64() % 4;
  for (std::size_t g = 0; g < groups; ++g) {
    GroupBatch b;
    b.group_id = make_group_id(producer, rng.next_u64() % 100000);
    b.horizon = static_cast<std::uint32_t>(rng.next_u64() % 9);
    b.chunk = static_cast<std::uint32_t>(1 + rng.next_u64() % 4);
    b.obs_dim = static_cast<std::uint32_t>(1 + rng.next_u64() % 5);
    b.act_dim = 2;
    const std::size_t nc = b.n_chunks();
    const std::size_t trajs = rng.next_u64() % 5;
    for (std::size_t t = 0; t < trajs; ++t) {
      Trajectory tr;
      tr.reward = static_cast<float>(rng.normal());
      tr.behavior_version = m.policy_version;
      for (std::size_t i = 0; i < nc * b.obs_dim; ++i) tr.obs.push_back(static_cast<float>(rng.normal()));
      for (std::size_t i = 0; i < nc * b.chunk * b.act_dim; ++i) tr.actions.push_back(static_cast<float>(rng.normal()));
      for (std::size_t i = 0; i < nc; ++i) tr.behavior_log_prob.push_back(static_cast<float>(rng.normal()));
      b.trajectories.push_back(std::move(tr));
    }
    m.groups.push_back(std::move(b));
  }
  return m;
}

inline swimlane::WireMessage random_message(swimlane::Rng& rng) {
  using namespace swimlane;
  switch (rng.next_u64() % 4) {
    case 0: return random_batch(rng, static_cast<std::uint16_t>(rng.next_u64()));
    case 1: {
      MetadataMsg m;
      const std::size_t n = rng.next_u64() % 5;
      for (std::size_t i = 0; i < n; ++i) {
        std::string k(rng.next_u64() % 12, 'a'), v(rng.next_u64() % 40, 'b');
        for (auto& c : k) c = static_cast<char>('a' + rng.next_u64() % 26);
        for (auto& c : v) c = static_cast<char>(rng.next_u64() % 256);
        m.entries.emplace_back(k, v);
      }
      return m;
    }
    case 2: {
      WeightSnapshotMsg w;
      w.version = rng.next_u64();
      w.params.resize(rng.next_u64() % 64);
      for (auto& p : w.params) p = static_cast<float>(rng.normal());
      return w;
    }
    default: return AckMsg{rng.next_u64()};
  }
}

inline swimlane::GroupBatch rewards_only(std::vector<float> rewards, std::uint64_t id = 0) {
  swimlane::GroupBatch g;
  g.group_id = id;
  g.horizon = 4;
  g.chunk = 4;
  g.obs_dim = 4;
  g.act_dim = 2;
  for (float r : rewards) {
    swimlane::Trajectory t;
    t.reward = r;
    t.obs.assign(4, 0.0f);
    t.actions.assign(8, 0.0f);
    t.behavior_log_prob.assign(1, 0.0f);
    g.trajectories.push_back(t);
  }
  return g;
}

// Groups sampled from `behavior`, with optional per-chunk log-prob offsets
// to move the ratio away from 1.
inline std::vector<swimlane::GroupBatch> sampled_groups(const swimlane::PolicyParams& behavior, std::size_t n_groups, std::size_t G,
                                       std::size_t horizon, swimlane::Rng& rng, double offset_scale = 0.0) {
  const std::size_t chunk = behavior.w2.rows() / 2;
  const std::size_t obs_dim = behavior.w1.cols();
  const std::size_t nc = (horizon + chunk - 1) / chunk;
  std::vector<swimlane::GroupBatch> out;
  for (std::size_t g = 0; g < n_groups; ++g) {
    swimlane::GroupBatch b;
    b.group_id = g;
    b.horizon = static_cast<std::uint32_t>(horizon);
    b.chunk = static_cast<std::uint32_t>(chunk);
    b.obs_dim = static_cast<std::uint32_t>(obs_dim);
    b.act_dim = 2;
    for (std::size_t i = 0; i < G; ++i) {
      swimlane::Trajectory t;
      t.reward = static_cast<float>(rng.uniform());
      for (std::size_t c = 0; c < nc; ++c) {
        swimlane::DenseVec obs = swimlane::gaussian(rng, obs_dim);
        swimlane::ActionChunk a = swimlane::sample_chunk(behavior, obs.span(), rng);
        t.obs.insert(t.obs.end(), obs.begin(), obs.end());
        t.actions.insert(t.actions.end(), a.sampled.begin(), a.sampled.end());
        t.behavior_log_prob.push_back(static_cast<float>(a.log_prob + offset_scale * rng.uniform(-1, 1)));
      }
      b.trajectories.push_back(std::move(t));
    }
    out.push_back(std::move(b));
  }
  return out;
}

inline swimlane::PolicyConfig small_policy(std::size_t chunk = 2) { return swimlane::PolicyConfig{4, 8, chunk, 2, -0.5f}; }

}  // namespace fixture
