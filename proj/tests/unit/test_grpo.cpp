// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/grpo.hpp"

using namespace swimlane;

using fixture::rewards_only;
using fixture::sampled_groups;
using fixture::small_policy;

TEST_CASE("advantages: examples") {
  auto a = compute_advantages(rewards_only({1, 0, 0, 0}), 4, 0.0);
  CHECK(a[0] == doctest::Approx(std::sqrt(3.0)));
  CHECK(a[1] == doctest::Approx(-1.0 / std::sqrt(3.0)));

  for (double v : compute_advantages(rewards_only({0.5f, 0.5f, 0.5f, 0.5f}), 4, 1e-8)) CHECK(v == 0.0);
  CHECK_THROWS_AS(compute_advantages(rewards_only({1, 0, 1}), 4, 1e-8), ValidationError);
}

TEST_CASE("advantages: match the two-pass oracle and are invariant under translation") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> r(8);
    // Multiples of 1/1024 so the shifted rewards are exact.
    for (auto& x : r) x = static_cast<float>(std::floor(rng.uniform(-3, 3) * 1024) / 1024);
    const auto got = compute_advantages(rewards_only(r), 8, 0.0);
    std::vector<double> rd(r.begin(), r.end());
    const auto want = oracle::advantages(rd, 0.0);
    for (std::size_t i = 0; i < 8; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    std::vector<float> shifted = r;
    for (auto& x : shifted) x += 16.0f;
    const auto again = compute_advantages(rewards_only(shifted), 8, 0.0);
    for (std::size_t i = 0; i < 8; ++i) CHECK(again[i] == got[i]);
  }
}

TEST_CASE("clipped surrogate: branches") {
  auto t = clipped_surrogate(1.5, 1.0, 0.2);
  CHECK(t.loss == doctest::Approx(-1.2));
  CHECK(t.dloss_dratio == 0.0);
  CHECK(t.clipped);

  t = clipped_surrogate(0.5, -1.0, 0.2);
  CHECK(t.loss == doctest::Approx(0.8));
  CHECK(t.clipped);

  t = clipped_surrogate(1.0, 2.0, 0.2);
  CHECK(t.loss == doctest::Approx(-2.0));
  CHECK(t.dloss_dratio == doctest::Approx(-2.0));
  CHECK_FALSE(t.clipped);

  // Pessimistic side: for A > 0 and rho below the band the unclipped term wins.
  t = clipped_surrogate(0.5, 1.0, 0.2);
  CHECK(t.loss == doctest::Approx(-0.5));
  CHECK(t.dloss_dratio == doctest::Approx(-1.0));
}

TEST_CASE("adam: first step moves every coordinate by lr against the gradient sign") {
  GrpoConfig cfg;
  cfg.lr = 0.01;
  std::vector<float> p = {1.0f, -2.0f, 0.5f};
  const std::vector<float> g = {0.3f, -4.0f, 1e-3f};
  AdamState s = AdamState::zeros(3);
  adam_step(p, g, s, cfg);
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(-1.99).epsilon(1e-5));
  CHECK(p[2] == doctest::Approx(0.49).epsilon(1e-4));
  CHECK(s.step == 1);
}

TEST_CASE("adam: moments carry across steps") {
  // With a sign-changing gradient the second step is damped by the first
  // step's momentum, so two steps differ from a single step at double lr.
  GrpoConfig cfg;
  cfg.lr = 0.1;
  std::vector<float> two = {0.0f};
  AdamState s = AdamState::zeros(1);
  const std::vector<float> up = {1.0f}, down = {-1.0f};
  adam_step(two, up, s, cfg);
  adam_step(two, down, s, cfg);
  // Oracle: m2 = 0.9*0.1 - 0.1 = -0.01, v2 = 0.001999..., bias-corrected.
  const double m = (0.9 * 0.1 * 1 + 0.1 * -1) / (1 - 0.81);
  const double v = (0.999 * 0.001 + 0.001) / (1 - 0.999 * 0.999);
  const double expect = -0.1 - 0.1 * m / (std::sqrt(v) + 1e-8);
  CHECK(two[0] == doctest::Approx(expect).epsilon(1e-5));
  CHECK(two[0] != doctest::Approx(0.0));
}

TEST_CASE("gradient matches central differences of the oracle loss") {
  const PolicyConfig pc = small_policy(2);
  GrpoConfig cfg;
  cfg.group_size = 4;
  cfg.clip_eps = 0.2;
  cfg.adv_epsilon = 1e-8;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    PolicyParams p = policy_init(pc, rng);
    const auto groups = sampled_groups(p, 2, 4, 4, rng, 0.05);
    const GradientShard g = grpo_gradient(p, groups, cfg);
    CHECK(g.loss == doctest::Approx(oracle::grpo_loss(p, groups, cfg.clip_eps)).epsilon(1e-9));
    DenseVec flat = p.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const float orig = flat[i];
      flat[i] = orig + 1e-3f;
      const float hi = flat[i];
      const double lp = oracle::grpo_loss(PolicyParams::unflatten(pc, flat.span()), groups, cfg.clip_eps);
      flat[i] = orig - 1e-3f;
      const float lo = flat[i];
      const double lm = oracle::grpo_loss(PolicyParams::unflatten(pc, flat.span()), groups, cfg.clip_eps);
      flat[i] = orig;
      const double fd = (lp - lm) / (static_cast<double>(hi) - lo);
      CHECK(g.grad[i] == doctest::Approx(fd).epsilon(1e-4).scale(1e-3));
    }
  }
}

TEST_CASE("gradient: micro-batch size and shard split do not change the result beyond rounding") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(3);
  PolicyParams p = policy_init(pc, rng);
  const auto groups = sampled_groups(p, 4, 4, 6, rng, 0.1);
  GrpoConfig cfg;
  cfg.group_size = 4;
  cfg.micro_batch = 16;
  const GradientShard whole = grpo_gradient(p, groups, cfg);
  cfg.micro_batch = 3;
  const GradientShard sliced = grpo_gradient(p, groups, cfg);
  for (std::size_t i = 0; i < whole.grad.size(); ++i) CHECK(sliced.grad[i] == doctest::Approx(whole.grad[i]));

  // Two equal shards, each averaged locally, then averaged across workers.
  const std::vector<GroupBatch> a(groups.begin(), groups.begin() + 2), b(groups.begin() + 2, groups.end());
  const GradientShard parts[2] = {grpo_gradient(p, a, cfg), grpo_gradient(p, b, cfg)};
  const GradientShard reduced = reduce_shards(parts);
  for (std::size_t i = 0; i < whole.grad.size(); ++i) CHECK(reduced.grad[i] == doctest::Approx(whole.grad[i]));
}

TEST_CASE("gradient: group order in the input does not matter") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(5);
  PolicyParams p = policy_init(pc, rng);
  auto groups = sampled_groups(p, 3, 4, 4, rng, 0.1);
  GrpoConfig cfg;
  cfg.group_size = 4;
  const GradientShard first = grpo_gradient(p, groups, cfg);
  std::swap(groups[0], groups[2]);
  const GradientShard second = grpo_gradient(p, groups, cfg);
  CHECK(first.grad == second.grad);
}

TEST_CASE("gradient: a zero-variance batch produces a zero gradient") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(7);
  PolicyParams p = policy_init(pc, rng);
  auto groups = sampled_groups(p, 2, 4, 4, rng);
  for (auto& g : groups) {
    for (auto& t : g.trajectories) t.reward = 1.0f;
  }
  GrpoConfig cfg;
  cfg.group_size = 4;
  const GradientShard g = grpo_gradient(p, groups, cfg);
  for (double v : g.grad) CHECK(v == 0.0);
}

TEST_CASE("gradient: non-finite input names the group") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(9);
  PolicyParams p = policy_init(pc, rng);
  auto groups = sampled_groups(p, 3, 4, 4, rng);
  groups[1].group_id = 77;
  groups[1].trajectories[2].obs[1] = std::numeric_limits<float>::quiet_NaN();
  GrpoConfig cfg;
  cfg.group_size = 4;
  try {
    grpo_gradient(p, groups, cfg);
    FAIL("expected NonFiniteUpdate");
  } catch (const NonFiniteUpdate& e) {
    CHECK(e.group_id() == 77);
  }
}

TEST_CASE("gradient: mixed behavior versions inside a group are rejected") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(13);
  PolicyParams p = policy_init(pc, rng);
  auto groups = sampled_groups(p, 1, 4, 4, rng);
  groups[0].trajectories[1].behavior_version = 5;
  GrpoConfig cfg;
  cfg.group_size = 4;
  CHECK_THROWS_AS(grpo_gradient(p, groups, cfg), ValidationError);
}

TEST_CASE("update: improves the surrogate on a fixed batch") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(21);
  PolicyParams p = policy_init(pc, rng);
  const auto groups = sampled_groups(p, 4, 4, 4, rng);
  GrpoConfig cfg;
  cfg.group_size = 4;
  cfg.lr = 1e-3;
  AdamState s = AdamState::zeros(p.param_count());
  const double before = oracle::grpo_loss(p, groups, cfg.clip_eps);
  const UpdateStats st = grpo_update(p, groups, cfg, s, 4);
  CHECK(st.version == 5);
  CHECK(oracle::grpo_loss(p, groups, cfg.clip_eps) < before);
}

TEST_CASE("substep granularity: one term per substep, and the log-probs are required") {
  const PolicyConfig pc = small_policy(2);
  Rng rng(23);
  PolicyParams p = policy_init(pc, rng);
  auto groups = sampled_groups(p, 2, 4, 4, rng);
  for (auto& g : groups) {
    for (auto& t : g.trajectories) {
      for (std::size_t c = 0; c < 2; ++c) {
        for (double lp : substep_log_probs(p, {t.obs.data() + c * 4, 4}, {t.actions.data() + c * 4, 4})) {
          t.behavior_substep_log_prob.push_back(static_cast<float>(lp));
        }
      }
    }
  }
  GrpoConfig cfg;
  cfg.group_size = 4;
  cfg.granularity = RatioGranularity::Substep;
  const GradientShard sub = grpo_gradient(p, groups, cfg);
  CHECK(sub.terms == 2 * 4 * 2 * 2);
  CHECK(std::isfinite(sub.loss));
  for (auto& g : groups) {
    for (auto& t : g.trajectories) t.behavior_substep_log_prob.clear();
  }
  CHECK_THROWS_AS(grpo_gradient(p, groups, cfg), ValidationError);
}
