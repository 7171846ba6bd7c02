// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/policy.hpp"

using namespace swimlane;

TEST_CASE("policy: parameter layout and flatten round trip") {
  const PolicyConfig cfg{4, 8, 3, 2, -0.5f};
  CHECK(cfg.param_count() == 8 * 4 + 8 + 6 * 8 + 6 + 6);
  Rng rng(1);
  const PolicyParams p = policy_init(cfg, rng);
  CHECK(p.param_count() == cfg.param_count());
  CHECK(PolicyParams::unflatten(cfg, p.flatten().span()) == p);
  for (float s : p.log_std) CHECK(s == -0.5f);
  CHECK_THROWS_AS(PolicyParams::unflatten(cfg, DenseVec(3).span()), UsageError);
}

TEST_CASE("policy: log density matches the oracle and the sampling noise") {
  const PolicyConfig cfg{4, 8, 4, 2, -0.3f};
  Rng rng(2);
  const PolicyParams p = policy_init(cfg, rng);
  for (int i = 0; i < 50; ++i) {
    const DenseVec obs = gaussian(rng, 4);
    const ActionChunk a = sample_chunk(p, obs.span(), rng);
    // Sampling reports the density of the exact double-precision draw; the
    // stored float action differs from it by rounding only.
    CHECK(a.log_prob == doctest::Approx(log_prob_of(p, obs.span(), a.sampled.span())).epsilon(1e-5));
    CHECK(log_prob_of(p, obs.span(), a.sampled.span()) ==
          doctest::Approx(oracle::log_density(p, obs.data(), a.sampled.data())).epsilon(1e-12));
    double sum = 0;
    for (double s : substep_log_probs(p, obs.span(), a.sampled.span())) sum += s;
    CHECK(sum == doctest::Approx(log_prob_of(p, obs.span(), a.sampled.span())).epsilon(1e-12));
  }
}

TEST_CASE("policy: zero weights give the standard normal density at the origin") {
  const PolicyConfig cfg{4, 8, 1, 2, 0.0f};
  const PolicyParams p = PolicyParams::zeros(cfg);
  const float obs[4] = {0.3f, -0.1f, 0.2f, 0.9f};
  const float act[2] = {0.0f, 0.0f};
  CHECK(log_prob_of(p, obs, act) == doctest::Approx(-std::log(2 * std::numbers::pi)));
}

TEST_CASE("policy: backward matches central differences of the log density") {
  const PolicyConfig cfg{4, 8, 2, 2, -0.5f};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const PolicyParams p = policy_init(cfg, rng);
    const DenseVec obs = gaussian(rng, 4);
    const ActionChunk a = sample_chunk(p, obs.span(), rng);
    const DenseVec g = backward(p, obs.span(), a.sampled.span(), 1.0);
    DenseVec flat = p.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const float orig = flat[i];
      flat[i] = orig + 1e-3f;
      const float hi = flat[i];
      const double up = oracle::log_density(PolicyParams::unflatten(cfg, flat.span()), obs.data(), a.sampled.data());
      flat[i] = orig - 1e-3f;
      const float lo = flat[i];
      const double dn = oracle::log_density(PolicyParams::unflatten(cfg, flat.span()), obs.data(), a.sampled.data());
      flat[i] = orig;
      CHECK(g[i] == doctest::Approx((up - dn) / (static_cast<double>(hi) - lo)).epsilon(1e-4).scale(1e-3));
    }
  }
}

TEST_CASE("policy: per-substep upstream splits the chunk gradient") {
  const PolicyConfig cfg{4, 6, 3, 2, -0.5f};
  Rng rng(4);
  const PolicyParams p = policy_init(cfg, rng);
  const DenseVec obs = gaussian(rng, 4);
  const ActionChunk a = sample_chunk(p, obs.span(), rng);
  std::vector<double> whole(p.param_count(), 0.0), split(p.param_count(), 0.0);
  const double one[1] = {2.0};
  const double each[3] = {2.0, 2.0, 2.0};
  accumulate_log_prob_grad(p, obs.span(), a.sampled.span(), one, whole);
  accumulate_log_prob_grad(p, obs.span(), a.sampled.span(), each, split);
  for (std::size_t i = 0; i < whole.size(); ++i) CHECK(split[i] == doctest::Approx(whole[i]));
  const double wrong[2] = {1.0, 1.0};
  CHECK_THROWS_AS(accumulate_log_prob_grad(p, obs.span(), a.sampled.span(), wrong, split), UsageError);
}

TEST_CASE("policy: dimension mismatches are usage errors") {
  const PolicyConfig cfg{4, 8, 2, 2, -0.5f};
  Rng rng(5);
  const PolicyParams p = policy_init(cfg, rng);
  const float obs[3] = {};
  CHECK_THROWS_AS(forward(p, obs), UsageError);
  CHECK_THROWS_AS(PolicyConfig({4, 8, 2, 3, 0.0f}).validate(), ConfigError);
}
