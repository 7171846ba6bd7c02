// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "oracles.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/runtime.hpp"

using namespace swimlane;

namespace {

RunConfig small(std::string_view extra_runtime = "") {
  return parse_config(fmt::format(R"({{
    "env": {{"n_envs": 16, "horizon": 8, "step_overhead_us": 100,
            "latency_model": {{"ell0_us": 10, "n0": 768, "beta": 0, "gamma": 1}}}},
    "policy": {{"hidden": 8, "chunk": 2, "infer_overhead_us": 200, "infer_per_env_us": 5}},
    "grpo": {{"group_size": 4, "micro_batch": 2, "lr": 0.01, "train_overhead_us": 1000,
             "train_per_transition_us": 5}},
    "placement": {{"strategy": "hybrid", "slots": 2, "ratio": "1:1"}},
    "runtime": {{"seed": 7 {}}}
  }})",
                                  extra_runtime));
}

}  // namespace

TEST_CASE("runtime: synchronous run matches the simulator") {
  const RunConfig c = small();
  const auto r = run(c, RunMode::Sync, 12);
  CHECK(r.epochs.size() == 12);
  CHECK(r.final_version == 12);
  CHECK(r.max_consumption_staleness == 0);
  const auto fit = fit_check(simulate(c, RunMode::Sync, 12), aggregate(r, 1));
  CHECK(fit.max_dev < 1e-9);
}

TEST_CASE("runtime: asynchronous run matches the simulator and respects the bound") {
  const RunConfig c = small();
  const auto r = run(c, RunMode::Async, 12);
  const auto fit = fit_check(simulate(c, RunMode::Async, 12), aggregate(r, 1));
  CHECK(fit.max_dev < 1e-9);
  CHECK(r.max_consumption_staleness <= 1);
  CHECK(r.max_inference_staleness <= 1);
  for (std::size_t k = 2; k < r.epochs.size(); ++k) CHECK(r.epochs[k].behavior_version + 1 >= k);
}

TEST_CASE("runtime: zero staleness reproduces the synchronous parameters") {
  const RunConfig c = small(R"(, "staleness_limit": 0)");
  const auto sync = run(c, RunMode::Sync, 8);
  const auto async = run(c, RunMode::Async, 8);
  const DenseVec a = sync.final_params.flatten();
  const DenseVec b = async.final_params.flatten();
  REQUIRE(a.size() == b.size());
  float worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= 1e-6f);
  CHECK(sync.param_hashes == async.param_hashes);
}

TEST_CASE("runtime: identical seeds give identical runs") {
  const RunConfig c = small();
  for (RunMode m : {RunMode::Sync, RunMode::Async}) {
    const auto a = run(c, m, 6);
    const auto b = run(c, m, 6);
    CHECK(a.final_params.flatten() == b.final_params.flatten());
    CHECK(a.param_hashes == b.param_hashes);
  }
  RunConfig other = c;
  other.runtime.seed = 8;
  CHECK(run(other, RunMode::Sync, 3).param_hashes != run(c, RunMode::Sync, 3).param_hashes);
}

TEST_CASE("runtime: colocated hand-off makes no data copies") {
  RunConfig c = small();
  c.placement.strategy = Strategy::Colocated;
  c.placement.slots = 1;
  const auto r = run(c, RunMode::Async, 6);
  CHECK(r.transport.data_copies == 0);
  CHECK(r.transport.control_copies == 0);
  RunConfig h = small();
  CHECK(run(h, RunMode::Async, 6).transport.data_copies == 2 * 6);
}

TEST_CASE("runtime: two nodes keep trajectories local and exchange only control traffic") {
  RunConfig c = small();
  c.placement.nodes = 2;
  c.placement.inter_node = {50'000, 1'000'000'000};
  const auto r = run(c, RunMode::Async, 6);
  CHECK(r.transport.inter_node_data_bytes == 0);
  CHECK(r.transport.inter_node_control_bytes > 0);
  CHECK(r.param_hashes.size() == 2);
  CHECK(r.param_hashes[0] == r.param_hashes[1]);
  CHECK(r.transitions_produced == 2 * 6 * 16 * 8);
}

TEST_CASE("runtime: poisoned batches are quarantined, then the run aborts") {
  RunConfig c = small();
  RunOptions opt;
  opt.on_batch = [](std::uint32_t, std::uint64_t epoch, std::vector<GroupBatch>& groups) {
    if (epoch == 2) groups[0].trajectories[0].reward = std::numeric_limits<float>::quiet_NaN();
  };
  const auto r = run(c, RunMode::Async, 6, opt);
  CHECK(r.quarantined == 1);
  CHECK(r.final_version == 5);
  CHECK(r.transitions_consumed + 16 * 8 == r.transitions_produced);

  opt.on_batch = [](std::uint32_t, std::uint64_t, std::vector<GroupBatch>& groups) {
    groups[0].trajectories[0].reward = std::numeric_limits<float>::infinity();
  };
  CHECK_THROWS_AS(run(c, RunMode::Async, 6, opt), RuntimeAbort);
}

TEST_CASE("runtime: a stalled lane trips the watchdog with a named lane") {
  RunConfig c = small(R"(, "watchdog_s": 0.2)");
  RunOptions opt;
  opt.on_lane = [](LaneId lane, std::uint32_t, std::uint64_t epoch) {
    if (lane == LaneId::Trainer && epoch == 2) std::this_thread::sleep_for(std::chrono::milliseconds(1500));
  };
  try {
    run(c, RunMode::Async, 6, opt);
    FAIL("expected RuntimeAbort");
  } catch (const RuntimeAbort& e) {
    CHECK(std::string(e.what()).find("trainer") != std::string::npos);
  }
}

TEST_CASE("runtime: barrier-free audit and aggregate validation") {
  const RunConfig c = small();
  const auto r = run(c, RunMode::Async, 10);
  const auto audit = barrier_free_handoff_audit(r, 1);
  CHECK(audit.sampler_bubble >= 0.0);
  CHECK(audit.sampler_bubble < 0.5);
  CHECK_FALSE(audit.warmup_dominated);
  CHECK_THROWS_AS(aggregate(r, 10), ValidationError);
}

TEST_CASE("runtime: invalid configs are rejected before any lane starts") {
  RunConfig c = small();
  c.runtime.queue_capacity = 0;
  CHECK_THROWS_AS(run(c, RunMode::Async, 4), ConfigError);
  CHECK_THROWS_AS(run(small(), RunMode::Async, 0), ConfigError);
}
