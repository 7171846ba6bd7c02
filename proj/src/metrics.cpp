// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/metrics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

using nlohmann::json;

namespace {

json base(const char* kind) {
  json j;
  j["schema"] = kMetricsSchema;
  j["kind"] = kind;
  return j;
}

json pool_json(const PoolStats& s) {
  return {{"capacity", s.capacity},
          {"live_bytes", s.live_bytes},
          {"total_free", s.total_free},
          {"largest_free_block", s.largest_free_block},
          {"fragmentation", s.fragmentation},
          {"failed_allocs", s.failed_allocs},
          {"alloc_count", s.alloc_count},
          {"free_count", s.free_count},
          {"churn_bytes", s.churn_bytes},
          {"free_extents", s.free_extents}};
}

double now_unix() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

json epoch_record(const EpochReport& e, const RunConfig& cfg, RunMode mode) {
  const std::uint64_t chunk = cfg.policy.chunk;
  const std::uint64_t n_chunks = (cfg.env.horizon + chunk - 1) / chunk;
  json j = base("epoch");
  j["mode"] = to_string(mode);
  j["epoch"] = e.epoch;
  j["node"] = e.node;
  j["start"] = e.start;
  j["rollout_end"] = e.rollout_end;
  j["push"] = e.push;
  j["arrival"] = e.arrival;
  j["train_start"] = e.train_start;
  j["train_end"] = e.train_end;
  j["rollout_time"] = e.rollout_time;
  j["actor_time"] = e.actor_time;
  j["transfer_time"] = e.transfer_time;
  j["step_time"] = e.step_time;
  j["broadcast_time"] = e.broadcast_time;
  j["transitions"] = e.transitions;
  j["chunk"] = chunk;
  j["horizon"] = cfg.env.horizon;
  j["inference_steps"] = e.transitions / cfg.env.horizon * n_chunks;
  j["behavior_version"] = e.behavior_version;
  j["version_after"] = e.version_after;
  j["inference_staleness"] = e.inference_staleness;
  j["consumption_staleness"] = e.consumption_staleness;
  j["mean_reward"] = e.mean_reward;
  j["quarantined"] = e.quarantined;
  return j;
}

json update_record(const EpochReport& e) {
  json j = base("update");
  j["epoch"] = e.epoch;
  j["version"] = e.version_after;
  j["behavior_version"] = e.behavior_version;
  j["applied"] = !e.quarantined;
  j["loss"] = e.update.loss;
  j["mean_ratio"] = e.update.mean_ratio;
  j["clip_fraction"] = e.update.clip_fraction;
  j["grad_norm"] = e.update.grad_norm;
  j["groups"] = e.update.groups;
  j["trajectories"] = e.update.trajectories;
  j["mean_reward"] = e.mean_reward;
  return j;
}

json pool_record(const EpochReport& e) {
  json j = base("pool");
  j["epoch"] = e.epoch;
  j["env_aux"] = pool_json(e.env_pool);
  j["model_compute"] = pool_json(e.model_pool);
  return j;
}

json run_summary_record(const RunResult& r, const RunConfig& cfg) {
  json j = base("run_summary");
  j["mode"] = to_string(r.mode);
  j["virtual_time"] = r.virtual_time;
  j["strategy"] = to_string(cfg.placement.strategy);
  j["ratio"] = std::to_string(cfg.placement.ratio.rollout) + ":" + std::to_string(cfg.placement.ratio.actor);
  j["nodes"] = r.nodes;
  j["n_envs"] = cfg.env.n_envs;
  j["seed"] = cfg.runtime.seed;
  j["epochs"] = r.epochs.size();
  j["final_version"] = r.final_version;
  j["final_param_hash"] = r.param_hashes.empty() || r.param_hashes[0].empty() ? 0 : r.param_hashes[0].back();
  j["quarantined"] = r.quarantined;
  j["transitions_produced"] = r.transitions_produced;
  j["transitions_consumed"] = r.transitions_consumed;
  j["max_inference_staleness"] = r.max_inference_staleness;
  j["max_consumption_staleness"] = r.max_consumption_staleness;
  j["transport"] = {{"data_copies", r.transport.data_copies},
                    {"data_bytes", r.transport.data_bytes},
                    {"control_copies", r.transport.control_copies},
                    {"control_bytes", r.transport.control_bytes},
                    {"inter_node_data_bytes", r.transport.inter_node_data_bytes},
                    {"inter_node_control_bytes", r.transport.inter_node_control_bytes}};
  const std::uint32_t warmup = cfg.runtime.warmup_epochs;
  if (r.epochs.size() > warmup) {
    const StageAggregate a = aggregate(r, warmup);
    j["throughput"] = a.throughput;
    j["step_time"] = a.step_time;
    j["rollout_time"] = a.rollout_time;
    j["actor_time"] = a.actor_time;
    j["transfer_time"] = a.transfer_time;
  }
  // Real elapsed time only means something when costs were spun.
  if (!r.virtual_time) j["elapsed_s"] = r.wall_time;
  return j;
}

std::vector<json> run_records(const RunResult& r, const RunConfig& cfg) {
  std::vector<json> out;
  out.reserve(3 * r.epochs.size() + 1);
  for (const auto& e : r.epochs) {
    out.push_back(epoch_record(e, cfg, r.mode));
    out.push_back(update_record(e));
    out.push_back(pool_record(e));
  }
  out.push_back(run_summary_record(r, cfg));
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<json>& records, bool timestamps) {
  for (const auto& rec : records) {
    if (timestamps) {
      json j = rec;
      j[kTimestampKey] = now_unix();
      out << j.dump() << '\n';
    } else {
      out << rec.dump() << '\n';
    }
  }
  out.flush();
}

void write_jsonl_file(const std::string& path, const std::vector<json>& records, bool timestamps) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  write_jsonl(f, records, timestamps);
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  std::vector<json> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      if (i + 1 == lines.size()) break;
      throw ValidationError("metrics line " + std::to_string(i + 1) + " is not valid JSON");
    }
    if (!j.is_object() || j.value("schema", 0) != kMetricsSchema || !j.contains("kind")) {
      throw ValidationError("metrics line " + std::to_string(i + 1) + " is not a schema " +
                            std::to_string(kMetricsSchema) + " record");
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<json> read_jsonl_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  return read_jsonl(f);
}

json strip_timestamps(json record) {
  record.erase(kTimestampKey);
  record.erase("elapsed_s");
  return record;
}

ThroughputSummary summarize(const std::vector<json>& records, std::uint32_t warmup) {
  std::vector<const json*> epochs;
  for (const auto& r : records) {
    if (r.value("kind", "") == "epoch" && r.value("node", 0) == 0) epochs.push_back(&r);
  }
  if (epochs.size() <= warmup) throw ValidationError("no post-warmup epochs");
  ThroughputSummary s;
  const double window_start = warmup == 0 ? 0.0 : epochs[warmup - 1]->at("train_end").get<double>();
  s.wall_time = epochs.back()->at("train_end").get<double>() - window_start;
  s.chunk = epochs.front()->at("chunk").get<std::uint64_t>();
  const auto horizon = epochs.front()->value("horizon", std::uint64_t{0});
  bool exact = true;
  for (std::size_t k = warmup; k < epochs.size(); ++k) {
    const json& e = *epochs[k];
    if (e.at("chunk").get<std::uint64_t>() != s.chunk) throw ValidationError("chunk size changes within a run");
    const auto t = e.at("transitions").get<std::uint64_t>();
    const auto n = e.at("inference_steps").get<std::uint64_t>();
    exact = exact && t == n * s.chunk;
    if (horizon != 0 && n != t / horizon * ((horizon + s.chunk - 1) / s.chunk)) {
      throw ValidationError(fmt::format("epoch {}: {} inference steps do not cover {} transitions at chunk {}",
                                        e.value("epoch", std::uint64_t{0}), n, t, s.chunk));
    }
    s.transitions += t;
    s.inference_steps += n;
    ++s.epochs;
  }
  if (s.wall_time < 0) throw ValidationError("post-warmup epochs end before they start");
  // A zero-cost virtual run covers no time; its rates stay zero.
  if (s.wall_time == 0) return s;
  s.transitions_per_sec = static_cast<double>(s.transitions) / s.wall_time;
  s.inference_steps_per_sec = static_cast<double>(s.inference_steps) / s.wall_time;
  // Horizons that are not a chunk multiple truncate the last chunk, so the
  // identity only holds for whole chunks.
  if (exact && std::abs(s.transitions_per_sec - s.inference_steps_per_sec * static_cast<double>(s.chunk)) >
                   1e-9 * s.transitions_per_sec) {
    throw ValidationError("throughput chunk identity violated");
  }
  return s;
}

std::vector<std::pair<std::uint64_t, double>> success_rate_curve(const std::vector<json>& records) {
  std::map<std::uint64_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (r.value("kind", "") != "update") continue;
    auto& [sum, n] = acc[r.at("behavior_version").get<std::uint64_t>()];
    sum += r.at("mean_reward").get<double>();
    ++n;
  }
  std::vector<std::pair<std::uint64_t, double>> out;
  out.reserve(acc.size());
  for (const auto& [v, p] : acc) out.emplace_back(v, p.first / static_cast<double>(p.second));
  return out;
}

std::optional<std::uint64_t> versions_to_reach(const std::vector<std::pair<std::uint64_t, double>>& curve,
                                               double threshold, std::size_t window) {
  if (window == 0) throw UsageError("versions_to_reach: window must be >= 1");
  double sum = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    sum += curve[i].second;
    if (i >= window) sum -= curve[i - window].second;
    if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) return curve[i].first;
  }
  return std::nullopt;
}

}  // namespace swimlane
