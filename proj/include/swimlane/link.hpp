// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace swimlane {

enum class Plane : std::uint8_t { Data, Control };

enum class TransportMode : std::uint8_t { InProc, Wire };

std::string_view to_string(Plane p) noexcept;
std::string_view to_string(TransportMode m) noexcept;

// Point-to-point link. Bandwidth 0 means unlimited.
struct LinkProfile {
  std::uint64_t latency_ns = 0;
  std::uint64_t bandwidth_Bps = 0;

  // latency + ceil(bytes / bandwidth), in integer nanoseconds.
  std::uint64_t delay_ns(std::uint64_t bytes) const noexcept;
  // Serialization part only (no latency).
  std::uint64_t occupancy_ns(std::uint64_t bytes) const noexcept;

  friend bool operator==(const LinkProfile&, const LinkProfile&) = default;
};

}  // namespace swimlane
