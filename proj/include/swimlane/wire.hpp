// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact wire format shared by every Wire-mode path (in-memory pipe and
// loopback socket). All integers little-endian.
//
//   header   magic "DVLA" | format_version u16 = 1 | msg_type u8 | payload_len u64
//   type 1   TrajectoryBatch: policy_version u64, group_count u32, groups...
//   type 2   Metadata: entry_count u32, (key_len u16, key, val_len u32, val)...
//   type 3   WeightSnapshot: version u64, param_count u64, f32 params
//   type 4   Ack: epoch_id u64

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "swimlane/grpo.hpp"
#include "swimlane/tensor.hpp"

namespace swimlane {

inline constexpr std::uint8_t kWireMagic[4] = {0x44, 0x56, 0x4C, 0x41};
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 15;

enum class MsgType : std::uint8_t { TrajectoryBatch = 1, Metadata = 2, WeightSnapshot = 3, Ack = 4 };

// The producer id rides in the top 16 bits of every group_id.
inline constexpr std::uint64_t make_group_id(std::uint16_t producer, std::uint64_t local) noexcept {
  return (static_cast<std::uint64_t>(producer) << 48) | (local & 0xFFFFFFFFFFFFull);
}
inline constexpr std::uint16_t producer_of(std::uint64_t group_id) noexcept {
  return static_cast<std::uint16_t>(group_id >> 48);
}

struct TrajectoryBatchMsg {
  std::uint64_t policy_version = 0;
  std::vector<GroupBatch> groups;

  // Producer of the first group; 0 for an empty batch.
  std::uint16_t producer() const noexcept { return groups.empty() ? 0 : producer_of(groups.front().group_id); }
  std::size_t transitions() const noexcept;
  friend bool operator==(const TrajectoryBatchMsg&, const TrajectoryBatchMsg&) = default;
};

struct MetadataMsg {
  std::vector<std::pair<std::string, std::string>> entries;
  friend bool operator==(const MetadataMsg&, const MetadataMsg&) = default;
};

struct AckMsg {
  std::uint64_t epoch_id = 0;
  friend bool operator==(const AckMsg&, const AckMsg&) = default;
};

// Raw decoded weights; may hold non-finite values straight off the wire.
struct WeightSnapshotMsg {
  std::uint64_t version = 0;
  std::vector<float> params;
  friend bool operator==(const WeightSnapshotMsg&, const WeightSnapshotMsg&) = default;
};

using DataPlaneMsg = std::variant<TrajectoryBatchMsg, MetadataMsg, AckMsg>;
using WireMessage = std::variant<TrajectoryBatchMsg, MetadataMsg, WeightSnapshotMsg, AckMsg>;

enum class DecodeErrorKind : std::uint8_t {
  BadMagic,
  VersionMismatch,
  UnknownType,
  Truncated,
  LengthOverflow,
  InvalidField,
  TrailingBytes,
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what), kind_(kind), offset_(offset) {}
  DecodeErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  DecodeErrorKind kind_;
  std::size_t offset_;
};

std::vector<std::uint8_t> serialize(const WireMessage& msg);
std::vector<std::uint8_t> serialize(const DataPlaneMsg& msg);
std::vector<std::uint8_t> serialize(const ParamSnapshot& snap);

// Throws DecodeError; never reads out of bounds.
WireMessage deserialize(std::span<const std::uint8_t> bytes);
DataPlaneMsg deserialize_data(std::span<const std::uint8_t> bytes);  // rejects weight frames
// ValidationError on non-finite params, DecodeError on anything malformed.
SnapshotPtr deserialize_snapshot(std::span<const std::uint8_t> bytes);

// Reads payload_len from a complete header; DecodeError on a bad header.
std::uint64_t frame_payload_length(std::span<const std::uint8_t> header);

std::size_t wire_size(const WireMessage& msg);
std::size_t trajectory_batch_wire_size(std::size_t n_groups, std::size_t group_size, std::size_t horizon,
                                       std::size_t chunk, std::size_t obs_dim, std::size_t act_dim);
inline constexpr std::size_t weight_snapshot_wire_size(std::size_t param_count) noexcept {
  return kHeaderBytes + 16 + 4 * param_count;
}

}  // namespace swimlane
