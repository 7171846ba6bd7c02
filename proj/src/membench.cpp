// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/membench.hpp"

#include <algorithm>
#include <optional>
#include <vector>

#include <json.hpp>

#include "swimlane/errors.hpp"
#include "swimlane/tensor.hpp"

namespace swimlane {

namespace {

// The env scratch requests of one epoch: (size, freed mid-epoch) in order,
// split into the part before and after the weight update.
struct EpochScript {
  std::vector<std::pair<std::uint64_t, bool>> before, after;
};

std::vector<EpochScript> make_script(const MembenchConfig& cfg, std::uint64_t& peak) {
  const std::uint64_t p = cfg.param_bytes;
  std::vector<EpochScript> out(cfg.epochs);
  peak = 0;
  for (std::uint64_t e = 0; e < cfg.epochs; ++e) {
    Rng rng = Rng::substream(cfg.seed, {e});
    const auto target = static_cast<std::uint64_t>(rng.uniform(1.0, 1.5) * static_cast<double>(p));
    std::uint64_t live = 0, total = 0, epoch_peak = 0;
    while (total < target) {
      const auto raw = static_cast<std::uint64_t>(rng.uniform(1.0 / 64, 1.0 / 8) * static_cast<double>(p));
      const std::uint64_t size = std::max<std::uint64_t>(64, raw / 64 * 64);
      const bool transient = rng.uniform() < 0.5;
      auto& phase = total < target / 2 ? out[e].before : out[e].after;
      phase.emplace_back(size, transient);
      live += size;
      total += size;
      epoch_peak = std::max(epoch_peak, live);
      if (transient) live -= size;
    }
    peak = std::max(peak, epoch_peak);
  }
  return out;
}

class Side {
 public:
  Side(Pool& model, Pool& env, bool unified) : model_(model), env_(env), unified_(unified) {}

  std::optional<PoolHandle> model_alloc(std::uint64_t size, std::uint64_t epoch) {
    auto h = model_.alloc(size, 64);
    if (!h && out.model_failed++ == 0) {
      const PoolStats s = model_.stats();
      out.first_model_failure_epoch = epoch;
      out.total_free_at_failure = s.total_free;
      out.largest_free_at_failure = s.largest_free_block;
    }
    return h;
  }

  void model_free(const PoolHandle& h) { model_.free(h); }

  void env_phase(const std::vector<std::pair<std::uint64_t, bool>>& reqs) {
    for (const auto& [size, transient] : reqs) {
      auto h = env_.alloc(size, 64);
      if (!h) {
        ++out.env_failed;
        continue;
      }
      if (transient) {
        env_.free(*h);
      } else {
        epoch_live_.push_back(*h);
      }
    }
  }

  void end_epoch() {
    if (unified_) {
      for (const auto& h : epoch_live_) env_.free(h);
    } else {
      env_.epoch_reset();
    }
    epoch_live_.clear();
  }

  MembenchSide out;

 private:
  Pool& model_;
  Pool& env_;
  bool unified_;
  std::vector<PoolHandle> epoch_live_;
};

void drive(Side& side, const MembenchConfig& cfg, const std::vector<EpochScript>& script) {
  const std::uint64_t p = cfg.param_bytes;
  // params, f64 gradient, Adam moments.
  for (std::uint64_t bytes : {p, 2 * p, p, p}) side.model_alloc(bytes, 0);
  std::optional<PoolHandle> snapshot = side.model_alloc(p, 0);
  for (std::uint64_t e = 0; e < cfg.epochs; ++e) {
    side.env_phase(script[e].before);
    // New version: stage the next snapshot, then release the previous one
    // once it has been broadcast.
    std::optional<PoolHandle> next = side.model_alloc(p, e);
    side.env_phase(script[e].after);
    if (next) {
      if (snapshot) side.model_free(*snapshot);
      snapshot = next;
    }
    side.end_epoch();
  }
}

}  // namespace

MembenchConfig MembenchConfig::from(const RunConfig& cfg) {
  MembenchConfig m;
  m.param_bytes = 4 * cfg.policy.param_count();
  m.epochs = cfg.runtime.epochs;
  m.seed = cfg.runtime.seed;
  m.model_capacity = cfg.pools.model_capacity;
  m.env_capacity = cfg.pools.env_capacity;
  return m;
}

MembenchReport run_membench(const MembenchConfig& cfg) {
  if (cfg.param_bytes < 64) throw ConfigError("membench needs at least 64 parameter bytes");
  MembenchReport r;
  r.config = cfg;
  const std::vector<EpochScript> script = make_script(cfg, r.peak_env_scratch);
  r.model_capacity = cfg.model_capacity ? cfg.model_capacity : 7 * cfg.param_bytes;
  r.env_capacity = cfg.env_capacity ? cfg.env_capacity : r.peak_env_scratch;

  {
    Pool model(PoolKind::ModelCompute, r.model_capacity);
    Pool env(PoolKind::EnvAux, r.env_capacity);
    Side side(model, env, false);
    drive(side, cfg, script);
    r.dual = side.out;
    r.dual.model = model.stats();
    r.dual.env = env.stats();
  }
  {
    Pool shared(PoolKind::UnifiedBaseline, r.model_capacity + r.env_capacity);
    Side side(shared, shared, true);
    drive(side, cfg, script);
    r.unified = side.out;
    r.unified.model = shared.stats();
  }
  return r;
}

namespace {

nlohmann::json stats_json(const PoolStats& s) {
  return {{"capacity", s.capacity},         {"live_bytes", s.live_bytes},
          {"total_free", s.total_free},     {"largest_free_block", s.largest_free_block},
          {"fragmentation", s.fragmentation}, {"failed_allocs", s.failed_allocs},
          {"alloc_count", s.alloc_count},   {"free_count", s.free_count},
          {"churn_bytes", s.churn_bytes},   {"free_extents", s.free_extents}};
}

}  // namespace

std::string membench_json(const MembenchReport& r) {
  nlohmann::json j;
  j["param_bytes"] = r.config.param_bytes;
  j["epochs"] = r.config.epochs;
  j["seed"] = r.config.seed;
  j["model_capacity"] = r.model_capacity;
  j["env_capacity"] = r.env_capacity;
  j["peak_env_scratch"] = r.peak_env_scratch;
  j["dual"] = {{"model_failed", r.dual.model_failed},
               {"env_failed", r.dual.env_failed},
               {"model_compute", stats_json(r.dual.model)},
               {"env_aux", stats_json(r.dual.env)}};
  j["unified"] = {{"model_failed", r.unified.model_failed},
                  {"env_failed", r.unified.env_failed},
                  {"first_model_failure_epoch", r.unified.model_failed ? nlohmann::json(r.unified.first_model_failure_epoch)
                                                                       : nlohmann::json(nullptr)},
                  {"total_free_at_failure", r.unified.total_free_at_failure},
                  {"largest_free_at_failure", r.unified.largest_free_at_failure},
                  {"pool", stats_json(r.unified.model)}};
  j["delta"] = {{"failed_allocs", static_cast<std::int64_t>(r.unified.model.failed_allocs) -
                                      static_cast<std::int64_t>(r.dual.model.failed_allocs + r.dual.env.failed_allocs)},
                {"largest_free_block_model", static_cast<std::int64_t>(r.dual.model.largest_free_block) -
                                                 static_cast<std::int64_t>(r.unified.model.largest_free_block)}};
  return j.dump(2);
}

}  // namespace swimlane
