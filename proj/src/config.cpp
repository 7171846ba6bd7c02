// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "swimlane/errors.hpp"

namespace swimlane {

using nlohmann::json;

std::string_view to_string(RunMode m) noexcept { return m == RunMode::Sync ? "sync" : "async"; }

RunMode parse_mode(std::string_view s) {
  if (s == "sync") return RunMode::Sync;
  if (s == "async") return RunMode::Async;
  throw ConfigError(fmt::format("unknown run mode '{}' (sync|async)", s));
}

namespace {

std::size_t line_of(std::string_view text, std::string_view key) {
  const std::string quoted = fmt::format("\"{}\"", key);
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// One JSON object section: typed getters plus unknown-key rejection.
class Section {
 public:
  Section(const json& j, std::string path, std::string_view text, std::string_view source)
      : j_(j), path_(std::move(path)), text_(text), source_(source) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: '{}' must be an object", source_, path_));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected a boolean");
        out = it->template get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("expected a string");
        out = it->template get<std::string>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
        out = it->template get<T>();
        if (!std::isfinite(static_cast<double>(out))) throw ConfigError("expected a finite number");
      } else {
        if (!it->is_number_integer() || (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0)) {
          throw ConfigError("expected a nonnegative integer");
        }
        const auto v = it->template get<std::uint64_t>();
        if (v > std::numeric_limits<T>::max()) throw ConfigError("integer out of range");
        out = static_cast<T>(v);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}.{}: {}", source_, line_of(text_, key), path_, key, e.what()));
    }
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_.empty() ? key : path_ + "." + key, text_, source_);
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ConfigError(fmt::format("{}:{}: {}.{}: {}", source_, line_of(text_, key), path_, key, msg));
  }

  void reject_unknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(fmt::format("{}:{}: unknown key '{}' in section '{}'", source_, line_of(text_, key), key,
                                      path_.empty() ? "<root>" : path_));
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::string_view text_;
  std::string_view source_;
  std::set<std::string> seen_;
};

void read_link(Section& s, LinkProfile& link) {
  double latency_us = static_cast<double>(link.latency_ns) / 1000.0;
  double bandwidth = static_cast<double>(link.bandwidth_Bps);
  s.get("latency_us", latency_us);
  s.get("bandwidth_Bps", bandwidth);
  if (latency_us < 0.0) s.fail("latency_us", "must be >= 0");
  if (bandwidth < 0.0) s.fail("bandwidth_Bps", "must be >= 0 (0 = unlimited)");
  link.latency_ns = static_cast<std::uint64_t>(std::llround(latency_us * 1000.0));
  link.bandwidth_Bps = static_cast<std::uint64_t>(std::llround(bandwidth));
  s.reject_unknown();
}

json link_json(const LinkProfile& l) {
  return {{"latency_us", static_cast<double>(l.latency_ns) / 1000.0}, {"bandwidth_Bps", l.bandwidth_Bps}};
}

}  // namespace

PlacementPlan RunConfig::plan() const {
  return plan_build(placement.strategy, placement.slots, placement.ratio, placement.env_with_rollout);
}

Topology RunConfig::topology() const { return replicate(plan(), placement.nodes, placement.inter_node); }

void RunConfig::validate() const {
  env.validate();
  policy.validate();
  grpo.validate();
  if (policy.obs_dim != env.obs_dim) throw ConfigError("policy.obs_dim must equal env.obs_dim");
  if (env.n_envs % grpo.group_size != 0) {
    throw ConfigError(fmt::format("env.n_envs {} is not a multiple of grpo.group_size {}", env.n_envs, grpo.group_size));
  }
  if (infer_overhead_us < 0 || infer_per_env_us < 0 || train_overhead_us < 0 || train_per_transition_us < 0) {
    throw ConfigError("cost model values must be nonnegative");
  }
  if (placement.nodes < 1) throw ConfigError("placement.nodes must be >= 1");
  if (placement.nodes > 0xFFFF) throw ConfigError("placement.nodes must fit in 16 bits");
  const PlacementPlan p = plan();
  const std::size_t groups = n_groups();
  if (groups % p.rollout_slots != 0) {
    throw ConfigError(fmt::format("{} groups do not divide across {} rollout workers", groups, p.rollout_slots));
  }
  if (groups % p.actor_slots != 0) {
    throw ConfigError(fmt::format("{} groups do not divide across {} actor shards", groups, p.actor_slots));
  }
  if (runtime.epochs < 1) throw ConfigError("runtime.epochs must be >= 1");
  if (runtime.queue_capacity < 1) throw ConfigError("runtime.queue_capacity must be >= 1");
  if (!(runtime.watchdog_s > 0.0)) throw ConfigError("runtime.watchdog_s must be > 0");
  if (grpo.granularity == RatioGranularity::Substep &&
      p.transport(Component::Rollout, Component::Actor) == TransportMode::Wire) {
    throw ConfigError("ratio_granularity 'substep' needs an in-process data plane; the wire format carries chunk log-probs only");
  }
}

std::string RunConfig::fingerprint() const {
  json j;
  j["env"] = {{"n_envs", env.n_envs},
              {"horizon", env.horizon},
              {"obs_dim", env.obs_dim},
              {"dt", env.dt},
              {"success_radius", env.success_radius},
              {"step_overhead_us", env.step_overhead_us},
              {"latency_model",
               {{"ell0_us", env.latency.ell0_us}, {"n0", env.latency.n0}, {"beta", env.latency.beta}, {"gamma", env.latency.gamma}}}};
  j["policy"] = {{"hidden", policy.hidden},
                 {"chunk", policy.chunk},
                 {"init_log_std", policy.init_log_std},
                 {"infer_overhead_us", infer_overhead_us},
                 {"infer_per_env_us", infer_per_env_us}};
  j["grpo"] = {{"group_size", grpo.group_size},
               {"clip_eps", grpo.clip_eps},
               {"adv_epsilon", grpo.adv_epsilon},
               {"micro_batch", grpo.micro_batch},
               {"lr", grpo.lr},
               {"beta1", grpo.beta1},
               {"beta2", grpo.beta2},
               {"opt_eps", grpo.opt_eps},
               {"max_grad_norm", grpo.max_grad_norm},
               {"kl_coef", grpo.kl_coef},
               {"ratio_granularity", grpo.granularity == RatioGranularity::Chunk ? "chunk" : "substep"},
               {"train_overhead_us", train_overhead_us},
               {"train_per_transition_us", train_per_transition_us}};
  j["placement"] = {{"strategy", std::string(to_string(placement.strategy))},
                    {"slots", placement.slots},
                    {"ratio", fmt::format("{}:{}", placement.ratio.rollout, placement.ratio.actor)},
                    {"nodes", placement.nodes},
                    {"env_with_rollout", placement.env_with_rollout},
                    {"link", link_json(placement.link)},
                    {"inter_node", link_json(placement.inter_node)}};
  j["runtime"] = {{"mode", std::string(to_string(runtime.mode))},
                  {"epochs", runtime.epochs},
                  {"queue_capacity", runtime.queue_capacity},
                  {"staleness_limit", runtime.staleness_limit == kUnboundedStaleness ? json("inf") : json(runtime.staleness_limit)},
                  {"seed", runtime.seed},
                  {"virtual_time", runtime.virtual_time},
                  {"warmup_epochs", runtime.warmup_epochs},
                  {"watchdog_s", runtime.watchdog_s},
                  {"max_consecutive_quarantine", runtime.max_consecutive_quarantine},
                  {"tcp_loopback", runtime.tcp_loopback}};
  j["pools"] = {{"model_capacity", pools.model_capacity},
                {"env_capacity", pools.env_capacity},
                {"unified_baseline", pools.unified_baseline}};
  return j.dump();
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: malformed JSON: {}", source, e.what()));
  }
  RunConfig cfg;
  Section top(root, "", text, source);

  if (auto env = top.sub("env")) {
    env->get("n_envs", cfg.env.n_envs);
    env->get("horizon", cfg.env.horizon);
    env->get("obs_dim", cfg.env.obs_dim);
    env->get("dt", cfg.env.dt);
    env->get("success_radius", cfg.env.success_radius);
    env->get("step_overhead_us", cfg.env.step_overhead_us);
    if (auto lat = env->sub("latency_model")) {
      lat->get("ell0_us", cfg.env.latency.ell0_us);
      lat->get("n0", cfg.env.latency.n0);
      lat->get("beta", cfg.env.latency.beta);
      lat->get("gamma", cfg.env.latency.gamma);
      lat->reject_unknown();
    }
    env->reject_unknown();
  }
  cfg.policy.obs_dim = cfg.env.obs_dim;

  if (auto pol = top.sub("policy")) {
    pol->get("hidden", cfg.policy.hidden);
    pol->get("chunk", cfg.policy.chunk);
    pol->get("init_log_std", cfg.policy.init_log_std);
    pol->get("infer_overhead_us", cfg.infer_overhead_us);
    pol->get("infer_per_env_us", cfg.infer_per_env_us);
    pol->reject_unknown();
  }

  if (auto g = top.sub("grpo")) {
    g->get("group_size", cfg.grpo.group_size);
    g->get("clip_eps", cfg.grpo.clip_eps);
    g->get("adv_epsilon", cfg.grpo.adv_epsilon);
    g->get("micro_batch", cfg.grpo.micro_batch);
    g->get("lr", cfg.grpo.lr);
    g->get("beta1", cfg.grpo.beta1);
    g->get("beta2", cfg.grpo.beta2);
    g->get("opt_eps", cfg.grpo.opt_eps);
    if (const json* mgn = g->raw("max_grad_norm")) {
      if (mgn->is_null()) {
        cfg.grpo.max_grad_norm = 0.0;
      } else {
        g->get("max_grad_norm", cfg.grpo.max_grad_norm);
      }
    }
    g->get("kl_coef", cfg.grpo.kl_coef);
    std::string gran = "chunk";
    g->get("ratio_granularity", gran);
    if (gran == "chunk") {
      cfg.grpo.granularity = RatioGranularity::Chunk;
    } else if (gran == "substep") {
      cfg.grpo.granularity = RatioGranularity::Substep;
    } else {
      g->fail("ratio_granularity", "expected 'chunk' or 'substep'");
    }
    g->get("train_overhead_us", cfg.train_overhead_us);
    g->get("train_per_transition_us", cfg.train_per_transition_us);
    g->reject_unknown();
  }

  if (auto p = top.sub("placement")) {
    std::string strategy(to_string(cfg.placement.strategy));
    p->get("strategy", strategy);
    try {
      cfg.placement.strategy = parse_strategy(strategy);
    } catch (const ConfigError& e) {
      p->fail("strategy", e.what());
    }
    p->get("slots", cfg.placement.slots);
    std::string ratio = fmt::format("{}:{}", cfg.placement.ratio.rollout, cfg.placement.ratio.actor);
    p->get("ratio", ratio);
    try {
      cfg.placement.ratio = parse_ratio(ratio);
    } catch (const ConfigError& e) {
      p->fail("ratio", e.what());
    }
    p->get("nodes", cfg.placement.nodes);
    p->get("env_with_rollout", cfg.placement.env_with_rollout);
    if (auto link = p->sub("link")) read_link(*link, cfg.placement.link);
    if (auto link = p->sub("inter_node")) read_link(*link, cfg.placement.inter_node);
    p->reject_unknown();
  }

  if (auto r = top.sub("runtime")) {
    std::string mode(to_string(cfg.runtime.mode));
    r->get("mode", mode);
    try {
      cfg.runtime.mode = parse_mode(mode);
    } catch (const ConfigError& e) {
      r->fail("mode", e.what());
    }
    r->get("epochs", cfg.runtime.epochs);
    r->get("queue_capacity", cfg.runtime.queue_capacity);
    if (const json* st = r->raw("staleness_limit")) {
      if (st->is_string()) {
        if (st->get<std::string>() != "inf") r->fail("staleness_limit", "expected an integer or \"inf\"");
        cfg.runtime.staleness_limit = kUnboundedStaleness;
      } else {
        r->get("staleness_limit", cfg.runtime.staleness_limit);
      }
    }
    r->get("seed", cfg.runtime.seed);
    r->get("virtual_time", cfg.runtime.virtual_time);
    r->get("warmup_epochs", cfg.runtime.warmup_epochs);
    r->get("watchdog_s", cfg.runtime.watchdog_s);
    r->get("max_consecutive_quarantine", cfg.runtime.max_consecutive_quarantine);
    r->get("tcp_loopback", cfg.runtime.tcp_loopback);
    r->reject_unknown();
  }

  if (auto pools = top.sub("pools")) {
    pools->get("model_capacity", cfg.pools.model_capacity);
    pools->get("env_capacity", cfg.pools.env_capacity);
    pools->get("unified_baseline", cfg.pools.unified_baseline);
    pools->reject_unknown();
  }
  top.reject_unknown();

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace swimlane
