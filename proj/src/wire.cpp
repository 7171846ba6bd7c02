// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/wire.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

std::size_t TrajectoryBatchMsg::transitions() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.transitions();
  return n;
}

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
      out_.insert(out_.end(), p, p + v.size() * 4);
    } else {
      for (float x : v) f32(x);
    }
  }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, std::size_t base) : in_(in), base_(base) {}

  std::size_t offset() const noexcept { return base_ + pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }

  void f32s(std::vector<float>& out, std::size_t n) {
    need(n * 4);
    out.resize(n);
    if constexpr (std::endian::native == std::endian::little) {
      if (n) std::memcpy(out.data(), in_.data() + pos_, n * 4);
      pos_ += n * 4;
    } else {
      for (auto& x : out) x = f32();
    }
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  // A count-driven block of `count * unit` bytes must fit in what is left.
  void check_fits(std::uint64_t count, std::uint64_t unit, std::size_t field_offset, const char* what) const {
    if (unit != 0 && count > remaining() / unit) {
      throw DecodeError(DecodeErrorKind::LengthOverflow, field_offset,
                        fmt::format("length overflow at offset {}: {} {} exceed the {} remaining bytes", field_offset,
                                    count, what, remaining()));
    }
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) {
      throw DecodeError(DecodeErrorKind::Truncated, offset(),
                        fmt::format("truncated at offset {}: need {} bytes, {} left", offset(), n, remaining()));
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::size_t n_chunks_of(std::size_t horizon, std::size_t chunk) { return chunk == 0 ? 0 : (horizon + chunk - 1) / chunk; }

std::size_t traj_bytes(std::size_t nc, std::size_t chunk, std::size_t obs_dim, std::size_t act_dim) {
  return 4 + 8 + 4 * (nc * obs_dim + nc * chunk * act_dim + nc);
}

void check_group_shape(const GroupBatch& g) {
  const std::size_t nc = g.n_chunks();
  for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
    const auto& t = g.trajectories[i];
    if (t.obs.size() != nc * g.obs_dim || t.actions.size() != nc * g.chunk * g.act_dim ||
        t.behavior_log_prob.size() != nc) {
      throw ValidationError(fmt::format("group {} trajectory {} does not match its declared shape", g.group_id, i));
    }
  }
  if (g.trajectories.size() > 0xFFFFFFFFu) throw ValidationError("too many trajectories for the wire format");
}

void write_header(Writer& w, MsgType type, std::uint64_t payload_len) {
  for (auto b : kWireMagic) w.u8(b);
  w.u16(kWireVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.u64(payload_len);
}

struct PayloadVisitor {
  Writer& w;

  void operator()(const TrajectoryBatchMsg& m) const {
    w.u64(m.policy_version);
    w.u32(static_cast<std::uint32_t>(m.groups.size()));
    for (const auto& g : m.groups) {
      check_group_shape(g);
      w.u64(g.group_id);
      w.u32(static_cast<std::uint32_t>(g.trajectories.size()));
      w.u32(g.horizon);
      w.u32(g.chunk);
      w.u32(g.obs_dim);
      w.u32(g.act_dim);
      for (const auto& t : g.trajectories) {
        w.f32(t.reward);
        w.u64(t.behavior_version);
        w.f32s(t.obs);
        w.f32s(t.actions);
        w.f32s(t.behavior_log_prob);
      }
    }
  }
  void operator()(const MetadataMsg& m) const {
    w.u32(static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& [k, v] : m.entries) {
      if (k.size() > 0xFFFF) throw ValidationError("metadata key longer than 65535 bytes");
      w.u16(static_cast<std::uint16_t>(k.size()));
      w.bytes(k);
      w.u32(static_cast<std::uint32_t>(v.size()));
      w.bytes(v);
    }
  }
  void operator()(const WeightSnapshotMsg& m) const {
    w.u64(m.version);
    w.u64(m.params.size());
    w.f32s(m.params);
  }
  void operator()(const AckMsg& m) const { w.u64(m.epoch_id); }
};

MsgType type_of(const WireMessage& msg) {
  switch (msg.index()) {
    case 0: return MsgType::TrajectoryBatch;
    case 1: return MsgType::Metadata;
    case 2: return MsgType::WeightSnapshot;
    default: return MsgType::Ack;
  }
}

WireMessage to_wire(const DataPlaneMsg& msg) {
  return std::visit([](const auto& m) -> WireMessage { return m; }, msg);
}

TrajectoryBatchMsg read_trajectories(Reader& r) {
  TrajectoryBatchMsg m;
  m.policy_version = r.u64();
  const std::size_t count_at = r.offset();
  const std::uint32_t groups = r.u32();
  r.check_fits(groups, 8 + 4 * 5, count_at, "groups");
  m.groups.reserve(groups);
  for (std::uint32_t gi = 0; gi < groups; ++gi) {
    GroupBatch g;
    g.group_id = r.u64();
    const std::size_t traj_at = r.offset();
    const std::uint32_t trajs = r.u32();
    const std::size_t shape_at = r.offset();
    g.horizon = r.u32();
    g.chunk = r.u32();
    g.obs_dim = r.u32();
    g.act_dim = r.u32();
    if (g.chunk == 0 && g.horizon != 0) {
      throw DecodeError(DecodeErrorKind::InvalidField, shape_at + 4,
                        fmt::format("invalid field at offset {}: chunk is 0", shape_at + 4));
    }
    const std::uint64_t nc = n_chunks_of(g.horizon, g.chunk);
    // Per-trajectory float count, computed in 128 bits so hostile shapes
    // cannot wrap around.
    const unsigned __int128 floats = static_cast<unsigned __int128>(nc) * g.obs_dim +
                                     static_cast<unsigned __int128>(nc) * g.chunk * g.act_dim + nc;
    const unsigned __int128 per_traj = 12 + 4 * floats;
    if (per_traj > r.remaining() && trajs > 0) {
      throw DecodeError(DecodeErrorKind::LengthOverflow, shape_at,
                        fmt::format("length overflow at offset {}: trajectory shape exceeds the payload", shape_at));
    }
    r.check_fits(trajs, static_cast<std::uint64_t>(per_traj), traj_at, "trajectories");
    g.trajectories.resize(trajs);
    for (auto& t : g.trajectories) {
      t.reward = r.f32();
      t.behavior_version = r.u64();
      r.f32s(t.obs, nc * g.obs_dim);
      r.f32s(t.actions, nc * g.chunk * g.act_dim);
      r.f32s(t.behavior_log_prob, nc);
    }
    m.groups.push_back(std::move(g));
  }
  return m;
}

MetadataMsg read_metadata(Reader& r) {
  MetadataMsg m;
  const std::size_t count_at = r.offset();
  const std::uint32_t n = r.u32();
  r.check_fits(n, 6, count_at, "metadata entries");
  m.entries.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t klen_at = r.offset();
    const std::uint16_t klen = r.u16();
    r.check_fits(klen, 1, klen_at, "key bytes");
    std::string key = r.str(klen);
    const std::size_t vlen_at = r.offset();
    const std::uint32_t vlen = r.u32();
    r.check_fits(vlen, 1, vlen_at, "value bytes");
    m.entries.emplace_back(std::move(key), r.str(vlen));
  }
  return m;
}

WeightSnapshotMsg read_weights(Reader& r) {
  WeightSnapshotMsg m;
  m.version = r.u64();
  const std::size_t count_at = r.offset();
  const std::uint64_t n = r.u64();
  r.check_fits(n, 4, count_at, "params");
  r.f32s(m.params, n);
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize(const WireMessage& msg) {
  const std::size_t size = wire_size(msg);
  Writer w(size);
  write_header(w, type_of(msg), size - kHeaderBytes);
  std::visit(PayloadVisitor{w}, msg);
  return w.take();
}

std::vector<std::uint8_t> serialize(const DataPlaneMsg& msg) { return serialize(to_wire(msg)); }

std::vector<std::uint8_t> serialize(const ParamSnapshot& snap) {
  return serialize(WireMessage{WeightSnapshotMsg{snap.version(), snap.params().values()}});
}

std::uint64_t frame_payload_length(std::span<const std::uint8_t> bytes) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) {
      throw DecodeError(DecodeErrorKind::Truncated, i, fmt::format("truncated at offset {}: incomplete header", i));
    }
    if (bytes[i] != kWireMagic[i]) throw DecodeError(DecodeErrorKind::BadMagic, 0, "bad magic at offset 0");
  }
  Reader r(bytes.subspan(4), 4);
  const std::uint16_t version = r.u16();
  if (version != kWireVersion) {
    throw DecodeError(DecodeErrorKind::VersionMismatch, 4,
                      fmt::format("version mismatch at offset 4: got {}, expected {}", version, kWireVersion));
  }
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 4) {
    throw DecodeError(DecodeErrorKind::UnknownType, 6, fmt::format("unknown message type {} at offset 6", type));
  }
  return r.u64();
}

WireMessage deserialize(std::span<const std::uint8_t> bytes) {
  const std::uint64_t payload_len = frame_payload_length(bytes);
  const auto type = static_cast<MsgType>(bytes[6]);
  const std::size_t avail = bytes.size() - kHeaderBytes;
  if (payload_len > avail) {
    throw DecodeError(DecodeErrorKind::Truncated, 7,
                      fmt::format("truncated at offset 7: payload_len {} but only {} bytes follow", payload_len, avail));
  }
  if (payload_len < avail) {
    throw DecodeError(DecodeErrorKind::TrailingBytes, kHeaderBytes + payload_len,
                      fmt::format("trailing bytes at offset {}", kHeaderBytes + payload_len));
  }
  Reader r(bytes.subspan(kHeaderBytes), kHeaderBytes);
  WireMessage msg;
  switch (type) {
    case MsgType::TrajectoryBatch: msg = read_trajectories(r); break;
    case MsgType::Metadata: msg = read_metadata(r); break;
    case MsgType::WeightSnapshot: msg = read_weights(r); break;
    case MsgType::Ack: msg = AckMsg{r.u64()}; break;
  }
  if (r.remaining() != 0) {
    throw DecodeError(DecodeErrorKind::TrailingBytes, r.offset(),
                      fmt::format("trailing bytes at offset {}: payload longer than its contents", r.offset()));
  }
  return msg;
}

DataPlaneMsg deserialize_data(std::span<const std::uint8_t> bytes) {
  WireMessage msg = deserialize(bytes);
  if (auto* t = std::get_if<TrajectoryBatchMsg>(&msg)) return std::move(*t);
  if (auto* m = std::get_if<MetadataMsg>(&msg)) return std::move(*m);
  if (auto* a = std::get_if<AckMsg>(&msg)) return *a;
  throw DecodeError(DecodeErrorKind::UnknownType, 6, "unknown message type 3 at offset 6: weight frame on the data plane");
}

SnapshotPtr deserialize_snapshot(std::span<const std::uint8_t> bytes) {
  WireMessage msg = deserialize(bytes);
  auto* w = std::get_if<WeightSnapshotMsg>(&msg);
  if (w == nullptr) {
    throw DecodeError(DecodeErrorKind::UnknownType, 6,
                      fmt::format("unknown message type {} at offset 6: expected a weight frame", bytes[6]));
  }
  return snapshot_from_params(DenseVec(std::move(w->params)), w->version);
}

std::size_t trajectory_batch_wire_size(std::size_t n_groups, std::size_t group_size, std::size_t horizon,
                                       std::size_t chunk, std::size_t obs_dim, std::size_t act_dim) {
  const std::size_t nc = n_chunks_of(horizon, chunk);
  return kHeaderBytes + 8 + 4 + n_groups * (8 + 4 * 5 + group_size * traj_bytes(nc, chunk, obs_dim, act_dim));
}

std::size_t wire_size(const WireMessage& msg) {
  struct Sizer {
    std::size_t operator()(const TrajectoryBatchMsg& m) const {
      std::size_t n = 8 + 4;
      for (const auto& g : m.groups) {
        n += 8 + 4 * 5;
        for (const auto& t : g.trajectories) n += 12 + 4 * (t.obs.size() + t.actions.size() + t.behavior_log_prob.size());
      }
      return n;
    }
    std::size_t operator()(const MetadataMsg& m) const {
      std::size_t n = 4;
      for (const auto& [k, v] : m.entries) n += 2 + k.size() + 4 + v.size();
      return n;
    }
    std::size_t operator()(const WeightSnapshotMsg& m) const { return 16 + 4 * m.params.size(); }
    std::size_t operator()(const AckMsg&) const { return 8; }
  };
  return kHeaderBytes + std::visit(Sizer{}, msg);
}

}  // namespace swimlane
