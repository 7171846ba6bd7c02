// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// The Data Plane (trajectories, metadata, acks) and the Weight Control Plane
// (versioned snapshots). They are separate types over separately tagged
// transports, so a message cannot end up on the wrong plane.
//
// InProc transports hand over shared_ptr<const ...> without touching the
// payload. Wire transports serialize on publish and deserialize on take
// (two copies) and charge the link profile: in virtual time as a computed
// arrival timestamp, in real time by holding the message until its
// delivery deadline.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "swimlane/channel.hpp"
#include "swimlane/link.hpp"
#include "swimlane/wire.hpp"

namespace swimlane {

class Transport {
 public:
  Transport(Plane plane, TransportMode mode, LinkProfile link = {}) : plane_(plane), mode_(mode), link_(link) {}

  Plane plane() const noexcept { return plane_; }
  TransportMode mode() const noexcept { return mode_; }
  const LinkProfile& link() const noexcept { return link_; }
  void inject_link_profile(LinkProfile link) { link_ = link; }

  // FIFO link: a frame starts serializing when both it and the link are
  // ready. Returns the virtual arrival time. InProc: arrival == send.
  std::uint64_t schedule(std::uint64_t bytes, std::uint64_t send_ns);

  void count(std::uint64_t bytes, std::uint64_t copies) noexcept {
    bytes_ += bytes;
    copies_ += copies;
    ++messages_;
  }
  std::uint64_t bytes() const noexcept { return bytes_; }
  std::uint64_t copies() const noexcept { return copies_; }
  std::uint64_t messages() const noexcept { return messages_; }

 private:
  Plane plane_;
  TransportMode mode_;
  LinkProfile link_;
  std::mutex link_mu_;
  std::uint64_t link_free_ns_ = 0;
  std::atomic<std::uint64_t> bytes_{0};
  std::atomic<std::uint64_t> copies_{0};
  std::atomic<std::uint64_t> messages_{0};
};

// Framed byte stream used by Wire transports.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(std::span<const std::uint8_t> frame) = 0;
  // One complete frame (header + payload). Throws DecodeError on a bad
  // header, RuntimeAbort when the stream is closed.
  virtual std::vector<std::uint8_t> read_frame() = 0;
  virtual void close() = 0;
};

class InMemoryPipe final : public ByteStream {
 public:
  void write(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> read_frame() override;
  void close() override;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> buf_;
  bool closed_ = false;
};

// Connected 127.0.0.1 socket pair; writer and reader ends in one object.
class TcpLoopback final : public ByteStream {
 public:
  TcpLoopback();
  ~TcpLoopback() override;
  TcpLoopback(const TcpLoopback&) = delete;
  TcpLoopback& operator=(const TcpLoopback&) = delete;

  void write(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> read_frame() override;
  void close() override;
  std::uint16_t port() const noexcept { return port_; }

 private:
  int tx_ = -1;
  int rx_ = -1;
  std::uint16_t port_ = 0;
};

using DataMsgPtr = std::shared_ptr<const DataPlaneMsg>;

struct DataDelivery {
  DataMsgPtr msg;
  std::uint64_t send_ns = 0;
  std::uint64_t arrival_ns = 0;
  std::uint64_t wire_bytes = 0;
};

// Bounded data-plane channel (backpressure, never drops).
class DataChannel {
 public:
  // `stream` is required for Wire transports (defaults to an in-memory pipe).
  // `pace_real_time` holds each Wire message until its real delivery deadline.
  DataChannel(std::size_t capacity, std::shared_ptr<Transport> transport, std::unique_ptr<ByteStream> stream = nullptr,
              bool pace_real_time = false);

  // Blocks while full. Returns the virtual arrival time, or nullopt once the
  // channel is closed (the producer's shutdown signal).
  std::optional<std::uint64_t> publish(DataMsgPtr msg, std::uint64_t send_ns = 0);
  std::optional<DataDelivery> take();
  template <class Duration>
  std::optional<DataDelivery> take_for(Duration timeout) {
    auto frame = frames_.pop_for(timeout);
    if (!frame) return std::nullopt;
    return receive(std::move(*frame));
  }

  void close();
  void abort();
  std::size_t size() const { return frames_.size(); }
  Transport& transport() noexcept { return *transport_; }

 private:
  struct Frame {
    DataMsgPtr msg;  // InProc only
    std::uint64_t send_ns = 0;
    std::uint64_t arrival_ns = 0;
    std::uint64_t bytes = 0;
    std::chrono::steady_clock::time_point deadline;
  };
  DataDelivery receive(Frame frame);

  std::shared_ptr<Transport> transport_;
  std::unique_ptr<ByteStream> stream_;
  bool pace_;
  std::mutex publish_mu_;
  Channel<Frame> frames_;
};

// Per-subscriber weight mailbox. Latest-wins: a newer snapshot replaces an
// unconsumed older one. With keep_all every snapshot is queued instead
// (virtual-time runs need the full history to pick versions by timestamp).
class ControlMailbox {
 public:
  struct Entry {
    SnapshotPtr snap;
    std::uint64_t avail_ns = 0;
  };

  explicit ControlMailbox(bool keep_all = false) : keep_all_(keep_all) {}

  // ValidationError when the version goes backwards.
  void put(SnapshotPtr snap, std::uint64_t avail_ns = 0);
  std::optional<Entry> take();  // blocks; nullopt after close
  template <class Duration>
  std::optional<Entry> take_for(Duration timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !slot_.empty(); });
    return take_locked();
  }
  std::optional<Entry> try_take();
  void close();
  std::uint64_t last_version() const;

 private:
  std::optional<Entry> take_locked();

  bool keep_all_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Entry> slot_;
  std::optional<std::uint64_t> last_put_;
  bool closed_ = false;
};

class ControlPlane {
 public:
  ControlPlane(std::shared_ptr<Transport> transport, std::size_t subscribers, bool keep_all = false);

  // Every subscriber receives the snapshot (a bit-identical copy over Wire).
  // ValidationError unless snap.version exceeds the last broadcast version.
  // Returns the virtual time at which the last subscriber has it.
  std::uint64_t broadcast(const SnapshotPtr& snap, std::uint64_t send_ns = 0);

  ControlMailbox& subscriber(std::size_t i) { return *mailboxes_.at(i); }
  std::size_t subscriber_count() const noexcept { return mailboxes_.size(); }
  Transport& transport() noexcept { return *transport_; }
  void close();

 private:
  std::shared_ptr<Transport> transport_;
  std::vector<std::unique_ptr<ControlMailbox>> mailboxes_;
  std::optional<std::uint64_t> last_version_;
  std::mutex mu_;
};

}  // namespace swimlane
