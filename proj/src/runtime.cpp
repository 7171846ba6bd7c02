// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "swimlane/busy.hpp"
#include "swimlane/cost_model.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/planes.hpp"

namespace swimlane {

std::string_view to_string(LaneId l) noexcept {
  switch (l) {
    case LaneId::Sampler: return "sampler";
    case LaneId::WeightRecv: return "weight-recv";
    case LaneId::Trainer: return "trainer";
    case LaneId::WeightDist: return "weight-dist";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kEnvSeedStream = 10;
constexpr std::uint64_t kPolicySeedStream = 11;
constexpr std::uint64_t kInitSeedStream = 12;

template <class F>
void parallel_for(std::size_t n, bool parallel, F&& body) {
  if (!parallel || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> threads;
    threads.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
      threads.emplace_back([&, i] {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    try {
      body(0);
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t env_scratch_bytes(const RunConfig& cfg, std::size_t m) {
  const std::size_t nc = (cfg.env.horizon + cfg.policy.chunk - 1) / cfg.policy.chunk;
  const std::size_t per_env = cfg.env.obs_dim + cfg.policy.chunk * kActDim + 1 + cfg.policy.chunk;
  return nc * m * per_env * sizeof(float);
}

// One rollout worker: an env shard of m envs and its epoch-scoped scratch pool.
class RolloutWorker {
 public:
  RolloutWorker(const RunConfig& cfg, std::uint32_t node, std::uint32_t index, std::uint32_t workers)
      : cfg_(cfg),
        node_(node),
        index_(index),
        m_(cfg.env.n_envs / workers),
        env_(shard_config(cfg, m_), Rng::mix_seed(cfg.runtime.seed, {kEnvSeedStream, node, index}),
             GroupLayout{m_ / cfg.grpo.group_size, cfg.grpo.group_size}),
        pool_(PoolKind::EnvAux, cfg.pools.env_capacity ? cfg.pools.env_capacity : 2 * env_scratch_bytes(cfg, m_)) {}

  // Appends this shard's groups for `epoch`. `on_chunk` runs before every
  // chunk inference.
  double collect(const PolicyParams& params, std::uint64_t version, std::uint64_t epoch, bool busy,
                 const std::function<void()>& on_chunk, std::vector<GroupBatch>& out) {
    const std::size_t G = cfg_.grpo.group_size;
    const std::size_t groups = m_ / G;
    const std::size_t chunk = cfg_.policy.chunk;
    const std::size_t H = cfg_.env.horizon;
    const std::size_t nc = (H + chunk - 1) / chunk;
    const std::size_t d = cfg_.env.obs_dim;
    const bool substep = cfg_.grpo.granularity == RatioGranularity::Substep;
    const std::size_t groups_per_node = cfg_.n_groups();

    pool_.epoch_reset();
    for (std::uint64_t bytes : {nc * m_ * d * 4, nc * m_ * chunk * kActDim * 4, nc * m_ * 4}) {
      if (!pool_.alloc(bytes, 64)) spdlog::warn("env scratch pool exhausted on node {} worker {}", node_, index_);
    }

    Rng rng = Rng::substream(cfg_.runtime.seed, {kPolicySeedStream, node_, epoch, index_});
    env_.set_busy_compute(busy);
    const std::size_t first = out.size();
    for (std::size_t g = 0; g < groups; ++g) {
      GroupBatch b;
      b.group_id = make_group_id(static_cast<std::uint16_t>(node_), epoch * groups_per_node + index_ * groups + g);
      b.horizon = static_cast<std::uint32_t>(H);
      b.chunk = static_cast<std::uint32_t>(chunk);
      b.obs_dim = static_cast<std::uint32_t>(d);
      b.act_dim = kActDim;
      b.trajectories.resize(G);
      for (auto& t : b.trajectories) {
        t.behavior_version = version;
        t.obs.reserve(nc * d);
        t.actions.reserve(nc * chunk * kActDim);
        t.behavior_log_prob.reserve(nc);
      }
      out.push_back(std::move(b));
    }
    auto traj = [&](std::size_t e) -> Trajectory& { return out[first + e / G].trajectories[e % G]; };

    std::vector<float> actions(m_ * chunk * kActDim);
    for (std::size_t c = 0; c < nc; ++c) {
      if (on_chunk) on_chunk();
      const DenseVec& obs = env_.observation();
      for (std::size_t e = 0; e < m_; ++e) {
        std::span<const float> o(obs.data() + e * d, d);
        const ActionChunk a = sample_chunk(params, o, rng);
        Trajectory& t = traj(e);
        t.obs.insert(t.obs.end(), o.begin(), o.end());
        t.actions.insert(t.actions.end(), a.sampled.begin(), a.sampled.end());
        t.behavior_log_prob.push_back(static_cast<float>(a.log_prob));
        if (substep) {
          for (double lp : substep_log_probs(params, o, a.sampled.span())) {
            t.behavior_substep_log_prob.push_back(static_cast<float>(lp));
          }
        }
        std::copy(a.sampled.begin(), a.sampled.end(), actions.begin() + static_cast<std::ptrdiff_t>(e * chunk * kActDim));
      }
      if (busy) BusyCompute::instance().spin_us(inference_cost_us(cfg_, m_));
      env_.step(actions, chunk);
    }
    const std::vector<float> rewards = env_.episode_outcome();
    double sum = 0.0;
    for (std::size_t e = 0; e < m_; ++e) {
      traj(e).reward = rewards[e];
      sum += rewards[e];
    }
    env_.next_episode();
    return sum;
  }

  PoolStats pool_stats() const { return pool_.stats(); }

 private:
  static EnvConfig shard_config(const RunConfig& cfg, std::size_t m) {
    EnvConfig e = cfg.env;
    e.n_envs = m;
    return e;
  }

  const RunConfig& cfg_;
  std::uint32_t node_;
  std::uint32_t index_;
  std::size_t m_;
  VecEnv env_;
  Pool pool_;
};

// Per-node learner: replicated params and optimizer state, A data-parallel
// gradient shards reduced in rank order.
class Learner {
 public:
  Learner(const RunConfig& cfg, std::uint32_t shards)
      : cfg_(cfg),
        shards_(shards),
        pool_(PoolKind::ModelCompute, model_capacity(cfg)) {
    Rng rng = Rng::substream(cfg.runtime.seed, {kInitSeedStream});
    params_ = policy_init(cfg.policy, rng);
    const std::uint64_t p = cfg.policy.param_count();
    adam_ = AdamState::zeros(p);
    // params, 64-bit gradient, two moments.
    for (std::uint64_t bytes : {4 * p, 8 * p, 4 * p, 4 * p}) {
      if (!pool_.alloc(bytes, 64)) throw ConfigError("pools.model_capacity too small for parameters and optimizer state");
    }
  }

  static std::uint64_t model_capacity(const RunConfig& cfg) {
    if (cfg.pools.model_capacity) return cfg.pools.model_capacity;
    const std::uint64_t bytes = 4 * cfg.policy.param_count();
    return 4 * bytes + 2 * bytes;
  }

  const PolicyParams& params() const noexcept { return params_; }
  std::uint64_t version() const noexcept { return version_; }

  // Throws NonFiniteUpdate.
  GradientShard node_gradient(std::vector<GroupBatch>& groups, bool busy) {
    std::stable_sort(groups.begin(), groups.end(),
                     [](const GroupBatch& a, const GroupBatch& b) { return a.group_id < b.group_id; });
    const std::size_t per = groups.size() / shards_;
    std::vector<GradientShard> parts(shards_);
    std::size_t transitions = 0;
    for (const auto& g : groups) transitions += g.transitions();
    const double spin_us =
        cfg_.train_overhead_us + static_cast<double>(transitions) / shards_ * cfg_.train_per_transition_us;
    parallel_for(shards_, busy, [&](std::size_t a) {
      std::span<const GroupBatch> shard(groups.data() + a * per, per);
      parts[a] = grpo_gradient(params_, shard, cfg_.grpo);
      if (busy) BusyCompute::instance().spin_us(spin_us);
    });
    return reduce_shards(parts);
  }

  UpdateStats apply(const GradientShard& reduced) {
    UpdateStats s = apply_gradient(params_, reduced, adam_, cfg_.grpo, version_ + 1);
    version_ = s.version;
    return s;
  }

  PoolStats pool_stats() const { return pool_.stats(); }

 private:
  const RunConfig& cfg_;
  std::uint32_t shards_;
  Pool pool_;
  PolicyParams params_;
  AdamState adam_;
  std::uint64_t version_ = 0;
};

// Cross-node gradient exchange. Each node's reduced gradient travels as a
// contiguous float frame to every peer over the inter-node control link;
// node 0 also relays coordinator metadata. A round yields nothing when any
// node's update was poisoned, so every replica skips it together.
class CrossNodeReducer {
 public:
  CrossNodeReducer(std::uint32_t nodes, Transport& control_link, std::atomic<bool>& aborted)
      : nodes_(nodes), link_(control_link), aborted_(aborted), slots_(nodes) {}

  struct Result {
    std::optional<GradientShard> grad;
    double ready = 0;
  };

  Result reduce(std::uint32_t node, std::uint64_t round, std::optional<GradientShard> local, double ready) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return aborted_ || (round_ == round && !slots_[node].filled); });
    if (aborted_) throw RuntimeAbort("cross-node reduction aborted");
    slots_[node] = {true, std::move(local), ready};
    if (++arrived_ == nodes_) {
      combine(round);
      cv_.notify_all();
    } else {
      cv_.wait(lock, [&] { return aborted_ || done_round_ == static_cast<std::int64_t>(round); });
      if (aborted_) throw RuntimeAbort("cross-node reduction aborted");
    }
    Result r = result_;
    if (++taken_ == nodes_) {
      for (auto& s : slots_) s = {};
      arrived_ = 0;
      taken_ = 0;
      ++round_;
      cv_.notify_all();
    }
    return r;
  }

  // Used by the synchronous loop: all contributions at once.
  Result reduce_all(std::uint64_t round, std::vector<std::optional<GradientShard>> parts, double ready) {
    std::lock_guard lock(mu_);
    for (std::uint32_t i = 0; i < nodes_; ++i) slots_[i] = {true, std::move(parts[i]), ready};
    combine(round);
    Result r = result_;
    for (auto& s : slots_) s = {};
    return r;
  }

  void wake() {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

 private:
  struct Slot {
    bool filled = false;
    std::optional<GradientShard> grad;
    double ready = 0;
  };

  void combine(std::uint64_t round) {
    result_ = {};
    bool poisoned = false;
    for (const auto& s : slots_) {
      result_.ready = std::max(result_.ready, s.ready);
      poisoned |= !s.grad.has_value();
    }
    MetadataMsg meta;
    meta.entries = {{"round", std::to_string(round)},
                    {"members", std::to_string(nodes_)},
                    {"coordinator", "0"},
                    {"shard_assignment", "node-local"}};
    const std::vector<std::uint8_t> meta_bytes = serialize(DataPlaneMsg{meta});
    for (std::uint32_t peer = 1; peer < nodes_; ++peer) {
      deserialize(meta_bytes);
      link_.count(meta_bytes.size(), 2);
    }
    if (poisoned) return;
    std::vector<GradientShard> received(nodes_);
    for (std::uint32_t i = 0; i < nodes_; ++i) {
      const GradientShard& g = *slots_[i].grad;
      WeightSnapshotMsg frame{round, std::vector<float>(g.grad.begin(), g.grad.end())};
      const std::vector<std::uint8_t> bytes = serialize(WireMessage{frame});
      for (std::uint32_t peer = 0; peer + 1 < nodes_; ++peer) link_.count(bytes.size(), 2);
      const auto decoded = std::get<WeightSnapshotMsg>(deserialize(bytes));
      received[i] = g;
      received[i].grad.assign(decoded.params.begin(), decoded.params.end());
    }
    result_.grad = reduce_shards(received);
    done_round_ = static_cast<std::int64_t>(round);
  }

  std::uint32_t nodes_;
  Transport& link_;
  std::atomic<bool>& aborted_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Slot> slots_;
  std::uint32_t arrived_ = 0;
  std::uint32_t taken_ = 0;
  std::uint64_t round_ = 0;
  std::int64_t done_round_ = -1;
  Result result_;
};

struct Heartbeat {
  std::atomic<std::int64_t> last_ns{0};
  std::atomic<std::uint64_t> epoch{0};
  std::atomic<const char*> state{"starting"};
  std::atomic<bool> finished{false};
};

std::int64_t steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
}

struct SlotEntry {
  SnapshotPtr snap;
  double avail = 0;
};

struct Node {
  std::uint32_t id = 0;
  std::vector<std::unique_ptr<RolloutWorker>> workers;
  std::unique_ptr<Learner> learner;
  std::shared_ptr<Transport> data_tx;
  std::shared_ptr<Transport> control_tx;
  std::unique_ptr<DataChannel> data;
  std::unique_ptr<ControlPlane> control;
  std::unique_ptr<ControlMailbox> outbox;

  std::mutex mu;
  std::condition_variable cv;
  std::vector<EpochReport> reports;
  std::vector<double> pop_time;
  std::vector<char> popped;
  std::uint64_t processed = 0;
  std::vector<std::uint64_t> version_after;
  std::vector<double> processed_time;
  std::map<std::uint64_t, SlotEntry> slot;
  std::uint64_t slot_latest = 0;
  std::vector<double> version_avail{0.0};
  std::vector<double> broadcast_ns;
  std::atomic<std::uint64_t> trainer_version{0};
  std::vector<std::uint64_t> hashes;
  std::vector<DenseVec> version_params;
  std::uint64_t produced = 0;
  std::uint64_t consumed = 0;
  std::uint64_t quarantined = 0;

  std::array<Heartbeat, kLaneCount> hb;
};

class Engine {
 public:
  Engine(const RunConfig& cfg, RunMode mode, std::uint64_t epochs, const RunOptions& options)
      : cfg_(cfg),
        mode_(mode),
        epochs_(epochs),
        options_(options),
        costs_(stage_costs(cfg)),
        virtual_(cfg.runtime.virtual_time),
        limit_(mode == RunMode::Sync ? 0 : cfg.runtime.staleness_limit),
        inter_data_(Plane::Data, TransportMode::Wire, cfg.placement.inter_node),
        inter_control_(Plane::Control, TransportMode::Wire, cfg.placement.inter_node),
        reducer_(cfg.placement.nodes, inter_control_, aborted_) {
    // Colocated lanes time-share their slots when they overlap.
    factor_ = (costs_.colocated && mode == RunMode::Async) ? 2.0 : 1.0;
    const PlacementPlan plan = cfg.plan();
    for (std::uint32_t n = 0; n < cfg.placement.nodes; ++n) {
      auto node = std::make_unique<Node>();
      node->id = n;
      for (std::uint32_t w = 0; w < plan.rollout_slots; ++w) {
        node->workers.push_back(std::make_unique<RolloutWorker>(cfg, n, w, plan.rollout_slots));
      }
      node->learner = std::make_unique<Learner>(cfg, plan.actor_slots);
      node->data_tx = std::make_shared<Transport>(Plane::Data, costs_.data_transport, cfg.placement.link);
      node->control_tx = std::make_shared<Transport>(Plane::Control, costs_.control_transport, cfg.placement.link);
      std::unique_ptr<ByteStream> stream;
      if (costs_.data_transport == TransportMode::Wire && cfg.runtime.tcp_loopback) stream = std::make_unique<TcpLoopback>();
      node->data = std::make_unique<DataChannel>(cfg.runtime.queue_capacity, node->data_tx, std::move(stream),
                                                 !virtual_);
      node->control = std::make_unique<ControlPlane>(node->control_tx, plan.rollout_slots, virtual_);
      node->outbox = std::make_unique<ControlMailbox>(virtual_);
      node->reports.resize(epochs);
      for (std::uint64_t k = 0; k < epochs; ++k) {
        node->reports[k].epoch = k;
        node->reports[k].node = n;
      }
      node->pop_time.assign(epochs, 0.0);
      node->popped.assign(epochs, 0);
      node->hashes.push_back(hash_floats(node->learner->params().flatten().span()));
      if (options.keep_version_params && n == 0) node->version_params.push_back(node->learner->params().flatten());
      auto snap = snapshot_from_params(node->learner->params().flatten(), 0);
      node->slot[0] = {snap, 0.0};
      nodes_.push_back(std::move(node));
    }
  }

  RunResult run() {
    const auto t0 = Clock::now();
    start_ns_ = steady_ns();
    if (mode_ == RunMode::Sync) {
      run_sync();
    } else {
      run_async();
    }
    RunResult r = collect();
    r.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
  }

 private:
  // ---- shared helpers ----

  double now_s() const { return static_cast<double>(steady_ns() - start_ns_) * 1e-9; }
  double to_s(double ns) const { return ns * 1e-9; }

  void beat(Node& n, LaneId lane, std::uint64_t epoch, const char* state) {
    auto& hb = n.hb[static_cast<std::size_t>(lane)];
    hb.last_ns = steady_ns();
    hb.epoch = epoch;
    hb.state = state;
  }

  void hook(LaneId lane, const Node& n, std::uint64_t epoch) {
    if (options_.on_lane) options_.on_lane(lane, n.id, epoch);
  }

  PolicyParams params_of(const SnapshotPtr& snap) const { return PolicyParams::unflatten(cfg_.policy, snap->params().span()); }

  // Rolls out one epoch on every worker of `n`; returns the reward sum.
  double rollout(Node& n, const PolicyParams& params, std::uint64_t version, std::uint64_t epoch,
                 std::vector<GroupBatch>& groups, const std::function<void()>& on_chunk) {
    const bool busy = !virtual_;
    std::vector<std::vector<GroupBatch>> parts(n.workers.size());
    std::vector<double> rewards(n.workers.size(), 0.0);
    parallel_for(n.workers.size(), busy, [&](std::size_t w) {
      rewards[w] = n.workers[w]->collect(params, version, epoch, busy, on_chunk, parts[w]);
    });
    double sum = 0;
    for (std::size_t w = 0; w < parts.size(); ++w) {
      sum += rewards[w];
      for (auto& g : parts[w]) groups.push_back(std::move(g));
    }
    return sum;
  }

  // Gradient for one node's epoch batch; nullopt when poisoned.
  std::optional<GradientShard> gradient(Node& n, std::uint64_t epoch, std::vector<GroupBatch>& groups) {
    if (options_.on_batch) options_.on_batch(n.id, epoch, groups);
    try {
      return n.learner->node_gradient(groups, !virtual_);
    } catch (const NonFiniteUpdate& e) {
      spdlog::warn("node {} epoch {}: quarantined batch: {}", n.id, epoch, e.what());
      return std::nullopt;
    }
  }

  // Applies (or skips) the update and records the bookkeeping shared by
  // both modes. Returns the new snapshot when the version advanced.
  SnapshotPtr commit(Node& n, std::uint64_t epoch, const std::optional<GradientShard>& reduced, double end,
                     std::uint64_t& consecutive_poisoned) {
    EpochReport& rep = n.reports[epoch];
    SnapshotPtr snap;
    if (reduced) {
      rep.update = n.learner->apply(*reduced);
      DenseVec flat = n.learner->params().flatten();
      n.hashes.push_back(hash_floats(flat.span()));
      if (options_.keep_version_params && n.id == 0) n.version_params.push_back(flat);
      snap = snapshot_from_params(flat, n.learner->version());
      consecutive_poisoned = 0;
    } else {
      rep.quarantined = true;
      ++consecutive_poisoned;
      if (consecutive_poisoned > cfg_.runtime.max_consecutive_quarantine) {
        throw RuntimeAbort(fmt::format("lane trainer node {} epoch {}: {} consecutive poisoned updates", n.id, epoch,
                                       consecutive_poisoned));
      }
    }
    std::lock_guard lock(n.mu);
    if (reduced) {
      n.consumed += rep.transitions;
    } else {
      ++n.quarantined;
    }
    rep.version_after = n.learner->version();
    rep.model_pool = n.learner->pool_stats();
    n.processed = epoch + 1;
    n.version_after.push_back(n.learner->version());
    n.processed_time.push_back(end);
    n.trainer_version = n.learner->version();
    n.cv.notify_all();
    return snap;
  }

  // ---- synchronous baseline ----

  void run_sync() {
    const bool busy = !virtual_;
    double t = 0;  // virtual ns
    std::vector<std::uint64_t> consecutive(nodes_.size(), 0);
    for (std::uint64_t k = 0; k < epochs_; ++k) {
      std::vector<std::optional<GradientShard>> grads(nodes_.size());
      std::vector<std::vector<GroupBatch>> batches(nodes_.size());
      double epoch_start = t;
      std::vector<double> rollout_end(nodes_.size()), arrival(nodes_.size());
      for (auto& np : nodes_) {
        Node& n = *np;
        hook(LaneId::Sampler, n, k);
        EpochReport& rep = n.reports[k];
        const SnapshotPtr installed = n.slot.rbegin()->second.snap;
        rep.behavior_version = installed->version();
        rep.inference_staleness = n.learner->version() - installed->version();
        rep.start = busy ? now_s() : to_s(epoch_start);
        std::vector<GroupBatch> groups;
        rep.mean_reward = rollout(n, params_of(installed), installed->version(), k, groups, {}) /
                          static_cast<double>(cfg_.env.n_envs);
        rep.env_pool = n.workers.front()->pool_stats();
        const double r_end = epoch_start + costs_.rollout_ns;
        rep.rollout_end = busy ? now_s() : to_s(r_end);
        rep.rollout_time = rep.rollout_end - rep.start;
        rep.push = rep.rollout_end;
        TrajectoryBatchMsg msg{installed->version(), std::move(groups)};
        rep.transitions = msg.transitions();
        n.produced += rep.transitions;
        const auto arr = n.data->publish(std::make_shared<const DataPlaneMsg>(std::move(msg)),
                                         static_cast<std::uint64_t>(r_end));
        auto delivery = n.data->take();
        if (!arr || !delivery) throw RuntimeAbort("data channel closed during a synchronous epoch");
        rep.arrival = busy ? now_s() : to_s(static_cast<double>(*arr));
        rep.train_start = rep.arrival;
        rep.transfer_time = rep.arrival - rep.push;
        rep.consumption_staleness = n.learner->version() - installed->version();
        hook(LaneId::Trainer, n, k);
        batches[n.id] = std::get<TrajectoryBatchMsg>(*delivery->msg).groups;
        grads[n.id] = gradient(n, k, batches[n.id]);
        arrival[n.id] = static_cast<double>(*arr);
        rollout_end[n.id] = r_end;
      }
      double ready = 0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        ready = std::max(ready, arrival[i] + costs_.actor_ns - costs_.allreduce_ns);
      }
      std::optional<GradientShard> reduced;
      if (nodes_.size() > 1) {
        reduced = reducer_.reduce_all(k, grads, ready).grad;
      } else {
        reduced = grads[0];
      }
      const double train_end = ready + costs_.allreduce_ns;
      double next_t = train_end;
      for (auto& np : nodes_) {
        Node& n = *np;
        EpochReport& rep = n.reports[k];
        rep.train_end = busy ? now_s() : to_s(train_end);
        rep.actor_time = rep.train_end - rep.train_start;
        hook(LaneId::WeightDist, n, k);
        SnapshotPtr snap = commit(n, k, reduced, train_end, consecutive[n.id]);
        double avail = train_end;
        if (snap) {
          avail = static_cast<double>(n.control->broadcast(snap, static_cast<std::uint64_t>(train_end)));
          hook(LaneId::WeightRecv, n, k);
          for (std::size_t i = 0; i < n.control->subscriber_count(); ++i) {
            auto e = n.control->subscriber(i).try_take();
            if (!e) throw RuntimeAbort("weight broadcast did not reach a subscriber");
            n.slot.clear();
            n.slot[e->snap->version()] = {e->snap, static_cast<double>(e->avail_ns)};
          }
        }
        rep.broadcast_time = busy ? now_s() - rep.train_end : to_s(avail - train_end);
        next_t = std::max(next_t, avail);
      }
      t = next_t;
    }
  }

  // ---- asynchronous four-lane engine ----

  void run_async() {
    std::vector<std::jthread> threads;
    for (auto& np : nodes_) {
      Node* n = np.get();
      threads.emplace_back([this, n] { guarded(*n, LaneId::Sampler, [&] { sampler_lane(*n); }); });
      threads.emplace_back([this, n] { guarded(*n, LaneId::WeightRecv, [&] { receiver_lane(*n); }); });
      threads.emplace_back([this, n] { guarded(*n, LaneId::Trainer, [&] { trainer_lane(*n); }); });
      threads.emplace_back([this, n] { guarded(*n, LaneId::WeightDist, [&] { distributor_lane(*n); }); });
    }
    std::jthread watchdog([this](std::stop_token stop) { watchdog_loop(stop); });
    for (auto& t : threads) t.join();
    watchdog.request_stop();
    {
      std::lock_guard lock(watch_mu_);
      watch_cv_.notify_all();
    }
    watchdog.join();
    if (aborted_) throw RuntimeAbort(abort_reason_);
  }

  template <class F>
  void guarded(Node& n, LaneId lane, F&& body) {
    beat(n, lane, 0, "running");
    try {
      body();
    } catch (const std::exception& e) {
      abort_run(fmt::format("lane {} node {} epoch {}: {}", to_string(lane), n.id,
                            n.hb[static_cast<std::size_t>(lane)].epoch.load(), e.what()));
    }
    n.hb[static_cast<std::size_t>(lane)].finished = true;
    n.hb[static_cast<std::size_t>(lane)].state = "finished";
  }

  void abort_run(const std::string& reason) {
    bool expected = false;
    {
      std::lock_guard lock(abort_mu_);
      if (!aborted_.compare_exchange_strong(expected, true)) return;
      abort_reason_ = reason + "\n" + lane_dump();
    }
    spdlog::error("run aborted: {}", reason);
    for (auto& np : nodes_) {
      {
        std::lock_guard lock(np->mu);
        np->cv.notify_all();
      }
      np->data->abort();
      np->control->close();
      np->outbox->close();
    }
    reducer_.wake();
  }

  std::string lane_dump() const {
    std::string out = "lane states:";
    const std::int64_t now = steady_ns();
    for (const auto& np : nodes_) {
      for (std::size_t l = 0; l < kLaneCount; ++l) {
        const Heartbeat& hb = np->hb[l];
        out += fmt::format("\n  node {} {:<11} epoch {:>4}  {:<28} last progress {:.3f} s ago", np->id,
                           to_string(static_cast<LaneId>(l)), hb.epoch.load(), hb.state.load(),
                           static_cast<double>(now - hb.last_ns.load()) * 1e-9);
      }
    }
    return out;
  }

  void watchdog_loop(std::stop_token stop) {
    const auto timeout_ns = static_cast<std::int64_t>(cfg_.runtime.watchdog_s * 1e9);
    const auto tick = std::chrono::nanoseconds(std::clamp<std::int64_t>(timeout_ns / 4, 1000000, 100000000));
    std::unique_lock lock(watch_mu_);
    while (!stop.stop_requested() && !aborted_) {
      watch_cv_.wait_for(lock, tick, [&] { return stop.stop_requested(); });
      const std::int64_t now = steady_ns();
      for (const auto& np : nodes_) {
        for (std::size_t l = 0; l < kLaneCount; ++l) {
          const Heartbeat& hb = np->hb[l];
          if (hb.finished || now - hb.last_ns.load() <= timeout_ns) continue;
          lock.unlock();
          abort_run(fmt::format("watchdog: lane {} node {} silent for more than {} s at epoch {} ({})",
                                to_string(static_cast<LaneId>(l)), np->id, cfg_.runtime.watchdog_s, hb.epoch.load(),
                                hb.state.load()));
          return;
        }
      }
    }
  }

  void check_abort() const {
    if (aborted_) throw RuntimeAbort("aborted");
  }

  template <class Pred>
  void wait(Node& n, std::unique_lock<std::mutex>& lock, Pred pred) {
    n.cv.wait(lock, [&] { return aborted_ || pred(); });
    check_abort();
  }

  // Virtual time at which the gate for batch count j opens.
  static double gate_ready(const Node& n, std::uint64_t j) {
    return std::max(n.version_avail.at(n.version_after[j - 1]), n.processed_time[j - 1]);
  }

  void sampler_lane(Node& n) {
    const bool busy = !virtual_;
    const bool bounded = limit_ != kUnboundedStaleness;
    const std::uint64_t Q = cfg_.runtime.queue_capacity;
    double t = 0;
    SnapshotPtr installed = n.slot.at(0).snap;
    PolicyParams params = params_of(installed);
    for (std::uint64_t k = 0; k < epochs_; ++k) {
      beat(n, LaneId::Sampler, k, "gate");
      hook(LaneId::Sampler, n, k);
      EpochReport& rep = n.reports[k];
      SnapshotPtr next = installed;
      double start = 0;
      {
        std::unique_lock lock(n.mu);
        if (!busy) {
          // Wait until every version that could be visible at the epoch
          // start has arrived, then choose by timestamp.
          if (k >= 1) wait(n, lock, [&] { return n.processed >= k && n.slot_latest >= n.version_after[k - 1]; });
          start = t;
          if (bounded && k > limit_) start = std::max(start, gate_ready(n, k - limit_));
          for (const auto& [v, e] : n.slot) {
            if (e.avail <= start && v >= next->version()) next = e.snap;
          }
          for (auto it = n.slot.begin(); it != n.slot.end() && it->first < next->version();) it = n.slot.erase(it);
          std::uint64_t trainer_v = 0;
          for (std::uint64_t j = 0; j < n.processed_time.size(); ++j) {
            if (n.processed_time[j] <= start) trainer_v = n.version_after[j];
          }
          rep.inference_staleness = trainer_v - next->version();
        } else {
          if (bounded && k > limit_) {
            const std::uint64_t j = k - limit_;
            wait(n, lock, [&] { return n.processed >= j && n.slot_latest >= n.version_after[j - 1]; });
          }
          if (!n.slot.empty() && n.slot.rbegin()->first > next->version()) next = n.slot.rbegin()->second.snap;
          rep.inference_staleness = n.trainer_version.load() - next->version();
        }
      }
      if (next != installed) {
        installed = next;
        params = params_of(installed);
      }
      const std::uint64_t v = installed->version();
      if (bounded && rep.inference_staleness > limit_) {
        throw RuntimeAbort(fmt::format("staleness violation: trainer ahead of behavior version {} by {} (limit {})", v,
                                       rep.inference_staleness, limit_));
      }
      std::uint64_t max_chunk_staleness = rep.inference_staleness;
      std::function<void()> on_chunk;
      if (busy) {
        on_chunk = [&] {
          const std::uint64_t tv = n.trainer_version.load();
          max_chunk_staleness = std::max(max_chunk_staleness, tv - v);
        };
        start = 0;
      }
      beat(n, LaneId::Sampler, k, "rollout");
      const double start_s = busy ? now_s() : to_s(start);
      std::vector<GroupBatch> groups;
      const double reward = rollout(n, params, v, k, groups, on_chunk);
      if (busy && bounded && max_chunk_staleness > limit_) {
        throw RuntimeAbort(fmt::format("staleness violation at chunk inference: trainer ahead of behavior version {} by {}",
                                       v, max_chunk_staleness));
      }
      const double rollout_end = start + costs_.rollout_ns * factor_;
      const double rollout_end_s = busy ? now_s() : to_s(rollout_end);
      double push = rollout_end;
      if (!busy && k >= Q) {
        std::unique_lock lock(n.mu);
        wait(n, lock, [&] { return n.popped[k - Q] != 0; });
        push = std::max(push, n.pop_time[k - Q]);
      }
      TrajectoryBatchMsg msg{v, std::move(groups)};
      const std::uint64_t transitions = msg.transitions();
      {
        std::lock_guard lock(n.mu);
        rep.behavior_version = v;
        rep.inference_staleness = max_chunk_staleness;
        rep.start = start_s;
        rep.rollout_end = rollout_end_s;
        rep.rollout_time = rollout_end_s - start_s;
        rep.transitions = transitions;
        rep.mean_reward = reward / static_cast<double>(cfg_.env.n_envs);
        rep.env_pool = n.workers.front()->pool_stats();
        n.produced += transitions;
      }
      beat(n, LaneId::Sampler, k, "publish");
      const auto arrival = n.data->publish(std::make_shared<const DataPlaneMsg>(std::move(msg)),
                                           static_cast<std::uint64_t>(push));
      if (!arrival) check_abort();
      {
        std::lock_guard lock(n.mu);
        rep.push = busy ? now_s() : to_s(push);
        if (!busy) rep.arrival = to_s(static_cast<double>(*arrival));
      }
      t = push;
      beat(n, LaneId::Sampler, k, "published");
    }
    n.data->close();
  }

  void trainer_lane(Node& n) {
    const bool busy = !virtual_;
    double t = 0;
    std::uint64_t consecutive = 0;
    for (std::uint64_t k = 0; k < epochs_; ++k) {
      beat(n, LaneId::Trainer, k, "waiting for data");
      auto delivery = n.data->take();
      if (!delivery) {
        check_abort();
        throw RuntimeAbort("data channel closed before the last epoch");
      }
      beat(n, LaneId::Trainer, k, "training");
      hook(LaneId::Trainer, n, k);
      const auto& msg = std::get<TrajectoryBatchMsg>(*delivery->msg);
      const double start = busy ? 0.0 : std::max(t, static_cast<double>(delivery->arrival_ns));
      const double start_s = busy ? now_s() : to_s(start);
      EpochReport& rep = n.reports[k];
      {
        std::lock_guard lock(n.mu);
        n.pop_time[k] = start;
        n.popped[k] = 1;
        if (busy) rep.arrival = start_s;
        rep.train_start = start_s;
        rep.transfer_time = rep.arrival - rep.push;
        rep.consumption_staleness = n.learner->version() - msg.policy_version;
        n.cv.notify_all();
      }
      if (limit_ != kUnboundedStaleness && rep.consumption_staleness > limit_) {
        throw RuntimeAbort(fmt::format("staleness violation: batch from version {} consumed at version {}",
                                       msg.policy_version, n.learner->version()));
      }
      std::vector<GroupBatch> groups = msg.groups;
      delivery.reset();
      std::optional<GradientShard> local = gradient(n, k, groups);
      double ready = start + (costs_.actor_ns - costs_.allreduce_ns) * factor_;
      std::optional<GradientShard> reduced;
      if (nodes_.size() > 1) {
        beat(n, LaneId::Trainer, k, "cross-node reduce");
        auto res = reducer_.reduce(n.id, k, std::move(local), ready);
        reduced = std::move(res.grad);
        ready = res.ready;
      } else {
        reduced = std::move(local);
      }
      const double end = ready + costs_.allreduce_ns * factor_;
      const double end_s = busy ? now_s() : to_s(end);
      {
        std::lock_guard lock(n.mu);
        rep.train_end = end_s;
        rep.actor_time = end_s - start_s;
      }
      SnapshotPtr snap = commit(n, k, reduced, busy ? 0.0 : end, consecutive);
      if (snap) n.outbox->put(snap, static_cast<std::uint64_t>(end));
      t = end;
      beat(n, LaneId::Trainer, k, "committed");
    }
    n.outbox->close();
  }

  void distributor_lane(Node& n) {
    const bool busy = !virtual_;
    double t = 0;
    while (true) {
      beat(n, LaneId::WeightDist, n.trainer_version.load(), "waiting for a version");
      auto e = n.outbox->take();
      if (!e) break;
      const std::uint64_t v = e->snap->version();
      beat(n, LaneId::WeightDist, v, "broadcasting");
      hook(LaneId::WeightDist, n, v);
      const double send = std::max(t, static_cast<double>(e->avail_ns));
      const double t0 = now_s();
      double done = static_cast<double>(n.control->broadcast(e->snap, static_cast<std::uint64_t>(send)));
      if (busy && costs_.broadcast_ns > 0) {
        std::this_thread::sleep_for(std::chrono::nanoseconds(static_cast<std::int64_t>(costs_.broadcast_ns)));
      }
      {
        std::lock_guard lock(n.mu);
        if (n.broadcast_ns.size() <= v) n.broadcast_ns.resize(v + 1, 0.0);
        n.broadcast_ns[v] = busy ? (now_s() - t0) * 1e9 : done - send;
      }
      t = done;
    }
    n.control->close();
  }

  void receiver_lane(Node& n) {
    const bool busy = !virtual_;
    while (true) {
      beat(n, LaneId::WeightRecv, n.slot_latest, "waiting for weights");
      std::optional<ControlMailbox::Entry> first = n.control->subscriber(0).take();
      if (!first) break;
      double avail = static_cast<double>(first->avail_ns);
      SnapshotPtr snap = first->snap;
      for (std::size_t i = 1; i < n.control->subscriber_count(); ++i) {
        auto e = busy ? n.control->subscriber(i).try_take() : n.control->subscriber(i).take();
        if (!e) {
          if (!busy) return;
          continue;
        }
        avail = std::max(avail, static_cast<double>(e->avail_ns));
      }
      const std::uint64_t v = snap->version();
      hook(LaneId::WeightRecv, n, v);
      std::lock_guard lock(n.mu);
      if (v < n.slot_latest) {
        spdlog::warn("node {}: ignoring stale weight broadcast v{} (have v{})", n.id, v, n.slot_latest);
        continue;
      }
      if (busy) n.slot.clear();
      n.slot[v] = {snap, avail};
      n.slot_latest = v;
      if (n.version_avail.size() <= v) n.version_avail.resize(v + 1, 0.0);
      n.version_avail[v] = avail;
      n.cv.notify_all();
      beat(n, LaneId::WeightRecv, v, "installed");
    }
  }

  // ---- results ----

  RunResult collect() {
    RunResult r;
    r.mode = mode_;
    r.virtual_time = virtual_;
    r.fingerprint = cfg_.fingerprint();
    r.nodes = cfg_.placement.nodes;
    r.staleness_limit = limit_;
    Node& n0 = *nodes_.front();
    r.epochs = n0.reports;
    for (std::size_t k = 0; k < r.epochs.size(); ++k) {
      EpochReport& e = r.epochs[k];
      e.step_time = e.train_end - (k == 0 ? 0.0 : r.epochs[k - 1].train_end);
      if (e.version_after > 0 && e.version_after < n0.broadcast_ns.size() && !e.quarantined && mode_ == RunMode::Async) {
        e.broadcast_time = n0.broadcast_ns[e.version_after] * 1e-9;
      }
    }
    r.final_params = n0.learner->params();
    r.final_version = n0.learner->version();
    r.version_params = std::move(n0.version_params);
    for (auto& np : nodes_) {
      r.param_hashes.push_back(np->hashes);
      r.quarantined += np->quarantined;
      r.transitions_produced += np->produced;
      r.transitions_consumed += np->consumed;
      for (const auto& e : np->reports) {
        r.max_inference_staleness = std::max(r.max_inference_staleness, e.inference_staleness);
        r.max_consumption_staleness = std::max(r.max_consumption_staleness, e.consumption_staleness);
      }
      r.transport.data_copies += np->data_tx->copies();
      r.transport.data_bytes += np->data_tx->bytes();
      r.transport.control_copies += np->control_tx->copies();
      r.transport.control_bytes += np->control_tx->bytes();
    }
    r.transport.inter_node_data_bytes = inter_data_.bytes();
    r.transport.inter_node_control_bytes = inter_control_.bytes();
    return r;
  }

  const RunConfig& cfg_;
  RunMode mode_;
  std::uint64_t epochs_;
  const RunOptions& options_;
  StageCosts costs_;
  bool virtual_;
  std::uint32_t limit_;
  double factor_ = 1.0;
  std::int64_t start_ns_ = 0;
  Transport inter_data_;
  Transport inter_control_;
  std::atomic<bool> aborted_{false};
  std::mutex abort_mu_;
  std::string abort_reason_;
  std::mutex watch_mu_;
  std::condition_variable watch_cv_;
  CrossNodeReducer reducer_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace

RunResult run(const RunConfig& cfg, RunMode mode, std::uint64_t epochs, const RunOptions& options) {
  cfg.validate();
  if (epochs == 0) throw ConfigError("run needs at least one epoch");
  Engine engine(cfg, mode, epochs, options);
  return engine.run();
}

StageAggregate aggregate(const RunResult& r, std::uint32_t warmup) {
  if (r.epochs.size() <= warmup) throw ValidationError("no post-warmup epochs");
  StageAggregate a;
  a.mode = r.mode;
  a.fingerprint = r.fingerprint;
  const double window_start = warmup == 0 ? 0.0 : r.epochs[warmup - 1].train_end;
  const double window = r.epochs.back().train_end - window_start;
  const double n = static_cast<double>(r.epochs.size() - warmup);
  std::uint64_t transitions = 0;
  for (std::size_t k = warmup; k < r.epochs.size(); ++k) {
    const auto& e = r.epochs[k];
    a.rollout_time += e.rollout_time / n;
    a.actor_time += e.actor_time / n;
    a.transfer_time += e.transfer_time / n;
    transitions += e.transitions;
  }
  a.step_time = window / n;
  a.throughput = window > 0 ? static_cast<double>(transitions * r.nodes) / window : 0.0;
  return a;
}

BubbleStats barrier_free_handoff_audit(const RunResult& r, std::uint32_t warmup) {
  BubbleStats b;
  if (r.epochs.empty()) return b;
  const std::size_t w = std::min<std::size_t>(warmup, r.epochs.size() - 1);
  b.warmup_dominated = r.epochs.size() - w < 2;
  const double lo = w == 0 ? 0.0 : r.epochs[w - 1].train_end;
  const double hi = r.epochs.back().train_end;
  b.wall_time = hi - lo;
  if (b.wall_time <= 0) return b;
  auto overlap = [&](double s, double e) { return std::max(0.0, std::min(e, hi) - std::max(s, lo)); };
  std::array<double, kLaneCount> busy{};
  for (const auto& e : r.epochs) {
    busy[static_cast<std::size_t>(LaneId::Sampler)] += overlap(e.start, e.rollout_end);
    busy[static_cast<std::size_t>(LaneId::Trainer)] += overlap(e.train_start, e.train_end);
    busy[static_cast<std::size_t>(LaneId::WeightDist)] += overlap(e.train_end, e.train_end + e.broadcast_time);
  }
  for (std::size_t l = 0; l < kLaneCount; ++l) b.idle_fraction[l] = 1.0 - busy[l] / b.wall_time;
  b.sampler_bubble = b.idle_fraction[static_cast<std::size_t>(LaneId::Sampler)];
  return b;
}

}  // namespace swimlane
