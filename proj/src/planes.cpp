// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/planes.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

std::uint64_t Transport::schedule(std::uint64_t bytes, std::uint64_t send_ns) {
  if (mode_ == TransportMode::InProc) return send_ns;
  std::lock_guard lock(link_mu_);
  const std::uint64_t start = std::max(send_ns, link_free_ns_);
  link_free_ns_ = start + link_.occupancy_ns(bytes);
  return link_free_ns_ + link_.latency_ns;
}

void InMemoryPipe::write(std::span<const std::uint8_t> frame) {
  std::lock_guard lock(mu_);
  if (closed_) throw RuntimeAbort("write to a closed pipe");
  buf_.insert(buf_.end(), frame.begin(), frame.end());
  cv_.notify_all();
}

std::vector<std::uint8_t> InMemoryPipe::read_frame() {
  std::unique_lock lock(mu_);
  std::vector<std::uint8_t> out(kHeaderBytes);
  cv_.wait(lock, [&] { return closed_ || buf_.size() >= kHeaderBytes; });
  if (buf_.size() < kHeaderBytes) throw RuntimeAbort("pipe closed mid-frame");
  std::copy_n(buf_.begin(), kHeaderBytes, out.begin());
  const std::uint64_t payload = frame_payload_length(out);
  cv_.wait(lock, [&] { return closed_ || buf_.size() - kHeaderBytes >= payload; });
  if (buf_.size() - kHeaderBytes < payload) throw RuntimeAbort("pipe closed mid-frame");
  out.resize(kHeaderBytes + payload);
  std::copy_n(buf_.begin() + kHeaderBytes, payload, out.begin() + kHeaderBytes);
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes + payload));
  return out;
}

void InMemoryPipe::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

namespace {

[[noreturn]] void sys_fail(const char* what) { throw RuntimeAbort(fmt::format("{}: {}", what, std::strerror(errno))); }

void read_exact(int fd, std::uint8_t* out, std::size_t n) {
  while (n > 0) {
    const ssize_t got = ::recv(fd, out, n, 0);
    if (got == 0) throw RuntimeAbort("loopback stream closed mid-frame");
    if (got < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    out += got;
    n -= static_cast<std::size_t>(got);
  }
}

}  // namespace

TcpLoopback::TcpLoopback() {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listener, 1) < 0 ||
      ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
    ::close(listener);
    sys_fail("loopback listen");
  }
  port_ = ntohs(addr.sin_port);
  tx_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (tx_ < 0 || ::connect(tx_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(listener);
    sys_fail("loopback connect");
  }
  rx_ = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (rx_ < 0) sys_fail("loopback accept");
  const int one = 1;
  ::setsockopt(tx_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpLoopback::~TcpLoopback() {
  if (tx_ >= 0) ::close(tx_);
  if (rx_ >= 0) ::close(rx_);
}

void TcpLoopback::write(std::span<const std::uint8_t> frame) {
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t n = ::send(tx_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::vector<std::uint8_t> TcpLoopback::read_frame() {
  std::vector<std::uint8_t> out(kHeaderBytes);
  read_exact(rx_, out.data(), kHeaderBytes);
  const std::uint64_t payload = frame_payload_length(out);
  out.resize(kHeaderBytes + payload);
  read_exact(rx_, out.data() + kHeaderBytes, payload);
  return out;
}

void TcpLoopback::close() {
  if (tx_ >= 0) ::shutdown(tx_, SHUT_RDWR);
  if (rx_ >= 0) ::shutdown(rx_, SHUT_RDWR);
}

DataChannel::DataChannel(std::size_t capacity, std::shared_ptr<Transport> transport, std::unique_ptr<ByteStream> stream,
                         bool pace_real_time)
    : transport_(std::move(transport)), stream_(std::move(stream)), pace_(pace_real_time), frames_(capacity) {
  if (transport_->plane() != Plane::Data) throw UsageError("DataChannel needs a data-plane transport");
  if (transport_->mode() == TransportMode::Wire && !stream_) stream_ = std::make_unique<InMemoryPipe>();
}

std::optional<std::uint64_t> DataChannel::publish(DataMsgPtr msg, std::uint64_t send_ns) {
  std::lock_guard lock(publish_mu_);
  Frame frame;
  frame.send_ns = send_ns;
  if (transport_->mode() == TransportMode::InProc) {
    frame.arrival_ns = send_ns;
    frame.msg = std::move(msg);
    transport_->count(0, 0);
    if (!frames_.push(std::move(frame))) return std::nullopt;
    return send_ns;
  }
  std::vector<std::uint8_t> bytes = serialize(*msg);
  frame.bytes = bytes.size();
  frame.arrival_ns = transport_->schedule(frame.bytes, send_ns);
  frame.deadline = std::chrono::steady_clock::now() + std::chrono::nanoseconds(transport_->link().delay_ns(frame.bytes));
  const std::uint64_t arrival = frame.arrival_ns;
  // Frame first: the reader only touches the stream after popping it, so a
  // full socket buffer cannot wedge the writer.
  if (!frames_.push(std::move(frame))) return std::nullopt;
  stream_->write(bytes);
  transport_->count(bytes.size(), 1);
  return arrival;
}

std::optional<DataDelivery> DataChannel::take() {
  auto frame = frames_.pop();
  if (!frame) return std::nullopt;
  return receive(std::move(*frame));
}

DataDelivery DataChannel::receive(Frame frame) {
  DataDelivery d;
  d.send_ns = frame.send_ns;
  d.arrival_ns = frame.arrival_ns;
  d.wire_bytes = frame.bytes;
  if (transport_->mode() == TransportMode::InProc) {
    d.msg = std::move(frame.msg);
    return d;
  }
  std::vector<std::uint8_t> bytes = stream_->read_frame();
  if (pace_) std::this_thread::sleep_until(frame.deadline);
  d.msg = std::make_shared<const DataPlaneMsg>(deserialize_data(bytes));
  transport_->count(0, 1);
  return d;
}

void DataChannel::close() { frames_.close(); }

void DataChannel::abort() {
  frames_.abort();
  if (stream_) stream_->close();
}

void ControlMailbox::put(SnapshotPtr snap, std::uint64_t avail_ns) {
  std::lock_guard lock(mu_);
  if (closed_) return;
  if (last_put_ && snap->version() < *last_put_) {
    throw ValidationError(fmt::format("mailbox version regression: {} after {}", snap->version(), *last_put_));
  }
  last_put_ = snap->version();
  if (!keep_all_) slot_.clear();
  slot_.push_back({std::move(snap), avail_ns});
  cv_.notify_all();
}

std::optional<ControlMailbox::Entry> ControlMailbox::take() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || !slot_.empty(); });
  return take_locked();
}

std::optional<ControlMailbox::Entry> ControlMailbox::try_take() {
  std::lock_guard lock(mu_);
  return take_locked();
}

std::optional<ControlMailbox::Entry> ControlMailbox::take_locked() {
  if (slot_.empty()) return std::nullopt;
  Entry e = std::move(slot_.front());
  slot_.pop_front();
  return e;
}

void ControlMailbox::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

std::uint64_t ControlMailbox::last_version() const {
  std::lock_guard lock(mu_);
  return last_put_.value_or(0);
}

ControlPlane::ControlPlane(std::shared_ptr<Transport> transport, std::size_t subscribers, bool keep_all)
    : transport_(std::move(transport)) {
  if (transport_->plane() != Plane::Control) throw UsageError("ControlPlane needs a control-plane transport");
  for (std::size_t i = 0; i < subscribers; ++i) mailboxes_.push_back(std::make_unique<ControlMailbox>(keep_all));
}

std::uint64_t ControlPlane::broadcast(const SnapshotPtr& snap, std::uint64_t send_ns) {
  std::lock_guard lock(mu_);
  if (last_version_ && snap->version() <= *last_version_) {
    throw ValidationError(
        fmt::format("broadcast version regression: {} after {}", snap->version(), *last_version_));
  }
  last_version_ = snap->version();
  std::uint64_t last_arrival = send_ns;
  for (auto& box : mailboxes_) {
    if (transport_->mode() == TransportMode::InProc) {
      transport_->count(0, 0);
      box->put(snap, send_ns);
      continue;
    }
    const std::vector<std::uint8_t> bytes = serialize(*snap);
    const std::uint64_t arrival = transport_->schedule(bytes.size(), send_ns);
    transport_->count(bytes.size(), 2);
    box->put(deserialize_snapshot(bytes), arrival);
    last_arrival = std::max(last_arrival, arrival);
  }
  return last_arrival;
}

void ControlPlane::close() {
  for (auto& box : mailboxes_) box->close();
}

}  // namespace swimlane
