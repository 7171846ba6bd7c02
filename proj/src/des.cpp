// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/des.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

std::string_view to_string(Bottleneck b) noexcept {
  switch (b) {
    case Bottleneck::Rollout: return "rollout";
    case Bottleneck::Actor: return "actor";
    case Bottleneck::Transfer: return "transfer";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDoneTolerance = 1e-6;  // ns

enum Owner : int { kSampler = 0, kTrainer = 1 };

// Processor sharing: n active jobs each progress at rate 1/n.
class PsResource {
 public:
  void advance(double now) {
    if (!jobs_.empty()) {
      const double share = (now - last_) / static_cast<double>(jobs_.size());
      for (auto& j : jobs_) j.remaining -= share;
    }
    last_ = now;
  }
  void add(Owner owner, double work, double now) {
    advance(now);
    jobs_.push_back({owner, work});
  }
  double next_completion() const {
    double best = kInf;
    for (const auto& j : jobs_) best = std::min(best, last_ + j.remaining * static_cast<double>(jobs_.size()));
    return best;
  }
  // Removes jobs that have finished by the last advance.
  std::vector<Owner> finished() {
    std::vector<Owner> out;
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      if (it->remaining <= kDoneTolerance) {
        out.push_back(it->owner);
        it = jobs_.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

 private:
  struct Job {
    Owner owner;
    double remaining;
  };
  std::vector<Job> jobs_;
  double last_ = 0.0;
};

enum class EventKind { Arrival, BroadcastDone };

struct Event {
  double time;
  std::uint64_t seq;
  EventKind kind;
  std::uint64_t index;
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

enum class SamplerState { Ready, Rolling, WaitPush, Done };

class Simulation {
 public:
  Simulation(const RunConfig& cfg, RunMode mode, std::uint64_t epochs)
      : cfg_(cfg), costs_(stage_costs(cfg)), epochs_(epochs), timeline_(epochs) {
    limit_ = mode == RunMode::Sync ? 0 : cfg.runtime.staleness_limit;
    tokens_ = cfg.runtime.queue_capacity;
    if (costs_.colocated) {
      trainer_res_ = &rollout_res_;
    } else {
      trainer_res_ = &actor_res_;
    }
    if (costs_.data_transport == TransportMode::Wire) {
      data_occupancy_ = static_cast<double>(cfg.placement.link.occupancy_ns(costs_.traj_bytes));
      data_latency_ = static_cast<double>(cfg.placement.link.latency_ns);
    }
    avail_.push_back(0.0);  // version 0 is installed from the start
    for (std::uint64_t k = 0; k < epochs; ++k) timeline_[k].epoch = k;
  }

  std::vector<SimEpoch> run() {
    while (trained_ < epochs_) {
      while (pump()) {
      }
      double next = std::min(rollout_res_.next_completion(), actor_res_.next_completion());
      if (!events_.empty()) next = std::min(next, events_.top().time);
      if (next == kInf) {
        throw RuntimeAbort(fmt::format("simulation blocked at t={} ns: sampler epoch {}, {} trained, {} tokens", now_,
                                       sampler_epoch_, trained_, tokens_));
      }
      now_ = next;
      rollout_res_.advance(now_);
      actor_res_.advance(now_);
      for (Owner o : rollout_res_.finished()) complete(o);
      if (trainer_res_ != &rollout_res_) {
        for (Owner o : actor_res_.finished()) complete(o);
      }
      while (!events_.empty() && events_.top().time <= now_) {
        const Event e = events_.top();
        events_.pop();
        handle(e);
      }
    }
    return std::move(timeline_);
  }

 private:
  bool gate_open(std::uint64_t k) const {
    if (limit_ == kUnboundedStaleness || k <= limit_) return true;
    const std::uint64_t need = k - limit_;
    return need < avail_.size() && avail_[need] <= now_;
  }

  std::uint64_t newest_available() const {
    std::uint64_t v = 0;
    for (std::uint64_t i = 0; i < avail_.size(); ++i) {
      if (avail_[i] <= now_) v = i;
    }
    return v;
  }

  bool pump() {
    bool progressed = false;
    if (sampler_ == SamplerState::Ready && sampler_epoch_ < epochs_ && gate_open(sampler_epoch_)) {
      SimEpoch& e = timeline_[sampler_epoch_];
      e.start = now_;
      e.behavior_version = newest_available();
      e.trainer_version_at_start = trained_;
      rollout_res_.add(kSampler, costs_.rollout_ns, now_);
      sampler_ = SamplerState::Rolling;
      progressed = true;
    }
    if (sampler_ == SamplerState::WaitPush && tokens_ > 0) {
      --tokens_;
      SimEpoch& e = timeline_[sampler_epoch_];
      e.push = now_;
      const double start = std::max(now_, link_free_);
      link_free_ = start + data_occupancy_;
      push_event(link_free_ + data_latency_, EventKind::Arrival, sampler_epoch_);
      ++sampler_epoch_;
      sampler_ = sampler_epoch_ < epochs_ ? SamplerState::Ready : SamplerState::Done;
      progressed = true;
    }
    if (!training_ && !arrived_.empty()) {
      const std::uint64_t k = arrived_.front();
      arrived_.pop_front();
      ++tokens_;
      timeline_[k].train_start = now_;
      trainer_res_->add(kTrainer, costs_.actor_ns, now_);
      training_ = true;
      training_epoch_ = k;
      progressed = true;
    }
    if (!broadcasting_ && !pending_versions_.empty()) {
      const std::uint64_t v = pending_versions_.front();
      pending_versions_.pop_front();
      broadcasting_ = true;
      push_event(now_ + costs_.broadcast_ns, EventKind::BroadcastDone, v);
      progressed = true;
    }
    return progressed;
  }

  void complete(Owner o) {
    if (o == kSampler) {
      timeline_[sampler_epoch_].rollout_end = now_;
      sampler_ = SamplerState::WaitPush;
    } else {
      timeline_[training_epoch_].train_end = now_;
      training_ = false;
      ++trained_;
      pending_versions_.push_back(trained_);
    }
  }

  void handle(const Event& e) {
    if (e.kind == EventKind::Arrival) {
      timeline_[e.index].arrival = e.time;
      arrived_.push_back(e.index);
    } else {
      broadcasting_ = false;
      avail_.push_back(e.time);
      timeline_[e.index - 1].version_avail = e.time;
    }
  }

  void push_event(double t, EventKind kind, std::uint64_t index) { events_.push({t, seq_++, kind, index}); }

  const RunConfig& cfg_;
  StageCosts costs_;
  std::uint64_t epochs_;
  std::vector<SimEpoch> timeline_;
  std::uint32_t limit_ = 1;
  std::uint32_t tokens_ = 1;

  double now_ = 0.0;
  PsResource rollout_res_;
  PsResource actor_res_;
  PsResource* trainer_res_ = nullptr;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;

  SamplerState sampler_ = SamplerState::Ready;
  std::uint64_t sampler_epoch_ = 0;
  double link_free_ = 0.0;
  double data_occupancy_ = 0.0;
  double data_latency_ = 0.0;
  std::deque<std::uint64_t> arrived_;
  bool training_ = false;
  std::uint64_t training_epoch_ = 0;
  std::uint64_t trained_ = 0;
  std::deque<std::uint64_t> pending_versions_;
  bool broadcasting_ = false;
  std::vector<double> avail_;

 public:
  const StageCosts& costs() const noexcept { return costs_; }
};

double rel_dev(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  return denom == 0.0 ? 0.0 : std::abs(a - b) / denom;
}

}  // namespace

SimResult simulate(const RunConfig& cfg, RunMode mode, std::uint64_t epochs) {
  const std::uint64_t warmup = cfg.runtime.warmup_epochs;
  if (epochs <= warmup) {
    throw ConfigError(fmt::format("simulate needs more than {} warmup epochs, got {}", warmup, epochs));
  }
  Simulation sim(cfg, mode, epochs);
  SimResult r;
  r.timeline = sim.run();
  r.costs = sim.costs();
  r.mode = mode;
  r.fingerprint = cfg.fingerprint();
  r.n_envs = cfg.env.n_envs;
  r.strategy = cfg.placement.strategy;
  r.ratio = cfg.placement.ratio;
  r.nodes = cfg.placement.nodes;

  const auto& tl = r.timeline;
  const double window_start = warmup == 0 ? 0.0 : tl[warmup - 1].train_end;
  const double window_end = tl.back().train_end;
  const double n = static_cast<double>(epochs - warmup);
  double roll = 0, act = 0, xfer = 0, sampler_busy = 0, trainer_busy = 0;
  for (std::uint64_t k = warmup; k < epochs; ++k) {
    roll += tl[k].rollout_end - tl[k].start;
    act += tl[k].train_end - tl[k].train_start;
    xfer += tl[k].arrival - tl[k].push;
  }
  for (const auto& e : tl) {
    sampler_busy += std::max(0.0, std::min(e.rollout_end, window_end) - std::max(e.start, window_start));
    trainer_busy += std::max(0.0, std::min(e.train_end, window_end) - std::max(e.train_start, window_start));
    r.max_staleness = std::max(r.max_staleness, e.trainer_version_at_start - e.behavior_version);
  }
  r.wall_time = (window_end - window_start) * 1e-9;
  r.step_time = r.wall_time / n;
  r.rollout_time = roll / n * 1e-9;
  r.actor_time = act / n * 1e-9;
  r.transfer_time = xfer / n * 1e-9;
  r.broadcast_time = r.costs.broadcast_ns * 1e-9;
  r.transitions = static_cast<std::uint64_t>(n) * r.costs.batch_transitions * r.nodes;
  r.throughput = r.wall_time > 0 ? static_cast<double>(r.transitions) / r.wall_time : 0.0;
  const double window_ns = window_end - window_start;
  r.sampler_occupancy = window_ns > 0 ? sampler_busy / window_ns : 0.0;
  r.trainer_occupancy = window_ns > 0 ? trainer_busy / window_ns : 0.0;

  r.bottleneck = Bottleneck::Rollout;
  double worst = r.rollout_time;
  if (r.actor_time > worst) {
    worst = r.actor_time;
    r.bottleneck = Bottleneck::Actor;
  }
  if (r.transfer_time > worst) r.bottleneck = Bottleneck::Transfer;
  return r;
}

std::vector<SimResult> sweep_envs(const RunConfig& cfg, std::span<const std::size_t> env_counts) {
  if (!std::is_sorted(env_counts.begin(), env_counts.end())) throw ConfigError("sweep env counts must ascend");
  std::vector<SimResult> curve;
  curve.reserve(env_counts.size());
  for (std::size_t n : env_counts) {
    RunConfig c = cfg;
    c.env.n_envs = n;
    c.validate();
    curve.push_back(simulate(c, c.runtime.mode, c.runtime.epochs));
  }
  return curve;
}

std::string sweep_csv(std::span<const SimResult> curve) {
  std::ostringstream os;
  os << "n_envs,mode,strategy,ratio,throughput,step_time,rollout_time,actor_time,transfer_time,bottleneck\n";
  for (const auto& r : curve) {
    os << fmt::format("{},{},{},{}:{},{:.6f},{:.9f},{:.9f},{:.9f},{:.9f},{}\n", r.n_envs, to_string(r.mode),
                      to_string(r.strategy), r.ratio.rollout, r.ratio.actor, r.throughput, r.step_time, r.rollout_time,
                      r.actor_time, r.transfer_time, to_string(r.bottleneck));
  }
  return os.str();
}

double pipeline_oracle_throughput(const SimResult& r) {
  const double stage = std::max(r.rollout_time, r.actor_time);
  return stage > 0 ? static_cast<double>(r.costs.batch_transitions * r.nodes) / stage : 0.0;
}

FitReport fit_check(const SimResult& sim, const StageAggregate& live, double threshold) {
  if (sim.fingerprint != live.fingerprint || sim.mode != live.mode) {
    throw ValidationError("fit_check: simulation and live run use different configurations or modes");
  }
  FitReport f;
  f.threshold = threshold;
  f.throughput_dev = rel_dev(sim.throughput, live.throughput);
  f.step_dev = rel_dev(sim.step_time, live.step_time);
  f.rollout_dev = rel_dev(sim.rollout_time, live.rollout_time);
  f.actor_dev = rel_dev(sim.actor_time, live.actor_time);
  f.transfer_dev = rel_dev(sim.transfer_time, live.transfer_time);
  f.max_dev = std::max({f.throughput_dev, f.step_dev, f.rollout_dev, f.actor_dev, f.transfer_dev});
  f.pass = f.max_dev < threshold;
  return f;
}

}  // namespace swimlane
