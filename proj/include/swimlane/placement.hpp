// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Placement plans: which abstract device slots host the environment, the
// rollout (inference) workers and the actor (trainer), and which transport
// each edge between them uses.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "swimlane/link.hpp"

namespace swimlane {

enum class Strategy : std::uint8_t { Colocated, Disaggregated, Hybrid };
enum class Component : std::uint8_t { Env, Rollout, Actor };

std::string_view to_string(Strategy s) noexcept;
std::string_view to_string(Component c) noexcept;
Strategy parse_strategy(std::string_view s);  // ConfigError on unknown names

struct Ratio {
  std::uint32_t rollout = 1;
  std::uint32_t actor = 1;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

Ratio parse_ratio(std::string_view s);  // "R:A"; ConfigError when malformed

struct DeviceSlot {
  std::uint32_t id = 0;
  std::uint32_t node = 0;
  // Slot group: components in the same group exchange data in-process.
  std::uint32_t group = 0;
  std::vector<Component> residents;

  bool hosts(Component c) const noexcept;
};

struct PlacementPlan {
  Strategy strategy = Strategy::Hybrid;
  std::uint32_t slots_total = 0;
  Ratio ratio;
  std::uint32_t rollout_slots = 0;
  std::uint32_t actor_slots = 0;
  bool env_collocated_with_rollout = true;
  std::vector<DeviceSlot> slots;

  // InProc iff both endpoints share a slot group.
  TransportMode transport(Component a, Component b) const;
  // Human-readable table, one row per slot plus an edge summary.
  std::string table() const;
};

// Colocated ignores the ratio. Disaggregated and Hybrid require
// (ratio.rollout + ratio.actor) to divide slots_total; otherwise ConfigError
// suggesting the nearest feasible split. Disaggregated places the env in its
// own slot group on the rollout slots unless `env_with_rollout` is set.
PlacementPlan plan_build(Strategy strategy, std::uint32_t slots_total, Ratio ratio, bool env_with_rollout = false);

struct Topology {
  std::uint32_t nodes = 1;
  PlacementPlan plan;  // replicated on every node
  LinkProfile inter_node;
};

// Throws ConfigError when nodes == 0.
Topology replicate(const PlacementPlan& plan, std::uint32_t nodes, const LinkProfile& inter_node);

// Linear time sharing: nominal * number of concurrently active residents.
// The slot overload assumes every resident is active.
double contention_cost(const DeviceSlot& slot, double nominal);
double contention_cost(std::uint32_t active_residents, double nominal);

}  // namespace swimlane
