// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/placement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

std::string_view to_string(Plane p) noexcept { return p == Plane::Data ? "data" : "control"; }

std::string_view to_string(TransportMode m) noexcept { return m == TransportMode::InProc ? "inproc" : "wire"; }

std::uint64_t LinkProfile::occupancy_ns(std::uint64_t bytes) const noexcept {
  if (bandwidth_Bps == 0) return 0;
  const unsigned __int128 num = static_cast<unsigned __int128>(bytes) * 1000000000u;
  return static_cast<std::uint64_t>((num + bandwidth_Bps - 1) / bandwidth_Bps);
}

std::uint64_t LinkProfile::delay_ns(std::uint64_t bytes) const noexcept { return latency_ns + occupancy_ns(bytes); }

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Colocated: return "colocated";
    case Strategy::Disaggregated: return "disaggregated";
    case Strategy::Hybrid: return "hybrid";
  }
  return "?";
}

std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::Env: return "env";
    case Component::Rollout: return "rollout";
    case Component::Actor: return "actor";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "colocated") return Strategy::Colocated;
  if (s == "disaggregated") return Strategy::Disaggregated;
  if (s == "hybrid") return Strategy::Hybrid;
  throw ConfigError(fmt::format("unknown placement strategy '{}' (colocated|disaggregated|hybrid)", s));
}

Ratio parse_ratio(std::string_view s) {
  const auto colon = s.find(':');
  Ratio r;
  auto parse = [&](std::string_view part, std::uint32_t& out) {
    const auto res = std::from_chars(part.data(), part.data() + part.size(), out);
    return res.ec == std::errc() && res.ptr == part.data() + part.size() && out > 0;
  };
  if (colon == std::string_view::npos || !parse(s.substr(0, colon), r.rollout) || !parse(s.substr(colon + 1), r.actor)) {
    throw ConfigError(fmt::format("malformed ratio '{}', expected R:A with positive integers", s));
  }
  return r;
}

bool DeviceSlot::hosts(Component c) const noexcept {
  return std::find(residents.begin(), residents.end(), c) != residents.end();
}

namespace {

std::uint32_t group_of(const PlacementPlan& plan, Component c) {
  for (const auto& slot : plan.slots) {
    if (slot.hosts(c)) return slot.group;
  }
  throw UsageError(fmt::format("component {} is not placed", to_string(c)));
}

// Groups: 0 = rollout (and env when collocated), 1 = actor, 2 = separate env.
constexpr std::uint32_t kRolloutGroup = 0;
constexpr std::uint32_t kActorGroup = 1;
constexpr std::uint32_t kEnvGroup = 2;

}  // namespace

TransportMode PlacementPlan::transport(Component a, Component b) const {
  if (strategy == Strategy::Colocated) return TransportMode::InProc;
  if (a == Component::Env || b == Component::Env) {
    // The env shares rollout slots; only its group differs when split off.
    const Component other = a == Component::Env ? b : a;
    if (other == Component::Env) return TransportMode::InProc;
    if (other == Component::Rollout) return env_collocated_with_rollout ? TransportMode::InProc : TransportMode::Wire;
    return TransportMode::Wire;
  }
  return group_of(*this, a) == group_of(*this, b) ? TransportMode::InProc : TransportMode::Wire;
}

PlacementPlan plan_build(Strategy strategy, std::uint32_t slots_total, Ratio ratio, bool env_with_rollout) {
  if (slots_total == 0) throw ConfigError("placement.slots must be >= 1");
  PlacementPlan plan;
  plan.strategy = strategy;
  plan.slots_total = slots_total;
  plan.ratio = ratio;

  if (strategy == Strategy::Colocated) {
    plan.rollout_slots = slots_total;
    plan.actor_slots = slots_total;
    plan.env_collocated_with_rollout = true;
    for (std::uint32_t i = 0; i < slots_total; ++i) {
      plan.slots.push_back({i, 0, kRolloutGroup, {Component::Env, Component::Rollout, Component::Actor}});
    }
    return plan;
  }

  if (ratio.rollout == 0 || ratio.actor == 0) throw ConfigError("placement ratio parts must be >= 1");
  const std::uint32_t parts = ratio.rollout + ratio.actor;
  if (slots_total % parts != 0) {
    // Nearest split of slots_total with at least one slot per side.
    const double share = static_cast<double>(ratio.rollout) / parts;
    auto r = static_cast<std::uint32_t>(std::lround(share * slots_total));
    r = std::clamp<std::uint32_t>(r, 1, slots_total > 1 ? slots_total - 1 : 1);
    throw ConfigError(fmt::format("ratio {}:{} does not divide {} slots; nearest feasible split is {}:{}",
                                  ratio.rollout, ratio.actor, slots_total, r, slots_total - r));
  }
  const std::uint32_t unit = slots_total / parts;
  plan.rollout_slots = ratio.rollout * unit;
  plan.actor_slots = ratio.actor * unit;
  plan.env_collocated_with_rollout = strategy == Strategy::Hybrid ? true : env_with_rollout;
  for (std::uint32_t i = 0; i < plan.rollout_slots; ++i) {
    plan.slots.push_back({i, 0, kRolloutGroup, {Component::Env, Component::Rollout}});
  }
  for (std::uint32_t i = 0; i < plan.actor_slots; ++i) {
    plan.slots.push_back({plan.rollout_slots + i, 0, kActorGroup, {Component::Actor}});
  }
  return plan;
}

std::string PlacementPlan::table() const {
  std::ostringstream os;
  os << fmt::format("strategy {}  slots {}  rollout {}  actor {}\n", to_string(strategy), slots_total, rollout_slots,
                    actor_slots);
  os << fmt::format("{:>4}  {:>4}  {:>5}  {}\n", "slot", "node", "group", "residents");
  for (const auto& slot : slots) {
    std::string names;
    for (auto c : slot.residents) {
      if (!names.empty()) names += "+";
      names += to_string(c);
      if (c == Component::Env && !env_collocated_with_rollout) names += fmt::format("(g{})", kEnvGroup);
    }
    os << fmt::format("{:>4}  {:>4}  {:>5}  {}\n", slot.id, slot.node, slot.group, names);
  }
  os << fmt::format("edges  env-rollout {}  rollout-actor {}  actor-rollout(weights) {}\n",
                    to_string(transport(Component::Env, Component::Rollout)),
                    to_string(transport(Component::Rollout, Component::Actor)),
                    to_string(transport(Component::Actor, Component::Rollout)));
  return os.str();
}

Topology replicate(const PlacementPlan& plan, std::uint32_t nodes, const LinkProfile& inter_node) {
  if (nodes == 0) throw ConfigError("placement.nodes must be >= 1");
  return Topology{nodes, plan, inter_node};
}

double contention_cost(const DeviceSlot& slot, double nominal) {
  return contention_cost(static_cast<std::uint32_t>(slot.residents.size()), nominal);
}

double contention_cost(std::uint32_t active_residents, double nominal) {
  return nominal * static_cast<double>(std::max<std::uint32_t>(active_residents, 1));
}

}  // namespace swimlane
