// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "fixtures.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/planes.hpp"

using namespace swimlane;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<Transport> data_tx(TransportMode m, LinkProfile l = {}) {
  return std::make_shared<Transport>(Plane::Data, m, l);
}

DataMsgPtr batch_msg(std::uint64_t seed) {
  Rng rng(seed);
  return std::make_shared<const DataPlaneMsg>(fixture::random_batch(rng));
}

}  // namespace

TEST_CASE("data plane: in-process hand-off passes the same buffer without copies") {
  DataChannel ch(2, data_tx(TransportMode::InProc));
  const DataMsgPtr m = batch_msg(1);
  ch.publish(m);
  const auto d = ch.take();
  CHECK(d->msg.get() == m.get());
  CHECK(ch.transport().copies() == 0);
  CHECK(ch.transport().bytes() == 0);
}

TEST_CASE("data plane: wire hand-off reconstructs the message with two copies") {
  for (bool tcp : {false, true}) {
    std::unique_ptr<ByteStream> stream;
    if (tcp) stream = std::make_unique<TcpLoopback>();
    DataChannel ch(2, data_tx(TransportMode::Wire), std::move(stream));
    for (std::uint64_t s = 0; s < 20; ++s) {
      const DataMsgPtr m = batch_msg(s);
      ch.publish(m);
      const auto d = ch.take();
      CHECK(*d->msg == *m);
      CHECK(d->msg.get() != m.get());
    }
    CHECK(ch.transport().copies() == 40);
    CHECK(ch.transport().messages() == 40);
  }
}

TEST_CASE("data plane: a full channel blocks the producer until a take") {
  DataChannel ch(2, data_tx(TransportMode::InProc));
  ch.publish(batch_msg(1));
  ch.publish(batch_msg(2));
  std::atomic<bool> third{false};
  std::thread producer([&] {
    ch.publish(batch_msg(3));
    third = true;
  });
  std::this_thread::sleep_for(50ms);
  CHECK_FALSE(third.load());
  CHECK(ch.size() == 2);
  ch.take();
  producer.join();
  CHECK(third.load());
}

TEST_CASE("data plane: FIFO per producer and close drains") {
  DataChannel ch(8, data_tx(TransportMode::Wire));
  for (std::uint64_t i = 0; i < 5; ++i) ch.publish(std::make_shared<const DataPlaneMsg>(AckMsg{i}));
  ch.close();
  CHECK_FALSE(ch.publish(std::make_shared<const DataPlaneMsg>(AckMsg{9})).has_value());
  for (std::uint64_t i = 0; i < 5; ++i) CHECK(std::get<AckMsg>(*ch.take()->msg).epoch_id == i);
  CHECK_FALSE(ch.take().has_value());
}

TEST_CASE("link profile: delay arithmetic") {
  const LinkProfile l{100'000, 100'000'000};
  CHECK(l.delay_ns(1'000'000) == 10'100'000);
  CHECK(LinkProfile{}.delay_ns(1 << 30) == 0);
  CHECK(LinkProfile{0, 3}.delay_ns(1) == 333'333'334);  // rounds up

  Transport wire(Plane::Data, TransportMode::Wire, l);
  CHECK(wire.schedule(1'000'000, 0) == 10'100'000);
  // The second frame queues behind the first one's serialization.
  CHECK(wire.schedule(1'000'000, 0) == 20'100'000);
  Transport inproc(Plane::Data, TransportMode::InProc, l);
  CHECK(inproc.schedule(1'000'000, 5) == 5);
}

TEST_CASE("data plane: virtual arrival honours the injected link") {
  DataChannel ch(2, data_tx(TransportMode::Wire, {100'000, 100'000'000}));
  const auto m = batch_msg(4);
  const std::uint64_t bytes = serialize(*m).size();
  const auto arrival = ch.publish(m, 1000);
  CHECK(*arrival == 1000 + LinkProfile{100'000, 100'000'000}.delay_ns(bytes));
  CHECK(ch.take()->arrival_ns == *arrival);
}

TEST_CASE("data plane: real-time pacing holds the message until its deadline") {
  DataChannel ch(2, data_tx(TransportMode::Wire, {20'000'000, 0}), nullptr, true);
  const auto t0 = std::chrono::steady_clock::now();
  ch.publish(batch_msg(5));
  ch.take();
  CHECK(std::chrono::steady_clock::now() - t0 >= 20ms);
}

TEST_CASE("control plane: latest-wins mailbox and monotonic versions") {
  auto tx = std::make_shared<Transport>(Plane::Control, TransportMode::InProc);
  ControlPlane cp(tx, 1);
  cp.broadcast(snapshot_from_params(DenseVec{1.0f}, 1));
  cp.broadcast(snapshot_from_params(DenseVec{2.0f}, 2));
  CHECK(cp.subscriber(0).take()->snap->version() == 2);
  CHECK_FALSE(cp.subscriber(0).try_take().has_value());
  CHECK_THROWS_AS(cp.broadcast(snapshot_from_params(DenseVec{1.0f}, 1)), ValidationError);
  CHECK_THROWS_AS(cp.broadcast(snapshot_from_params(DenseVec{1.0f}, 2)), ValidationError);
}

TEST_CASE("control plane: wire broadcast to four subscribers") {
  const std::size_t P = 100;
  auto tx = std::make_shared<Transport>(Plane::Control, TransportMode::Wire);
  ControlPlane cp(tx, 4);
  DenseVec params(P);
  for (std::size_t i = 0; i < P; ++i) params[i] = static_cast<float>(i) * 0.5f;
  const SnapshotPtr s = snapshot_from_params(params, 3);
  cp.broadcast(s);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto e = cp.subscriber(i).take();
    CHECK(e->snap->version() == 3);
    CHECK(e->snap->params() == params);
    CHECK(e->snap.get() != s.get());
  }
  CHECK(tx->bytes() == 4 * weight_snapshot_wire_size(P));
  CHECK(tx->copies() == 8);
}

TEST_CASE("control plane: keep-all mailboxes queue every version in order") {
  ControlMailbox box(true);
  for (std::uint64_t v = 1; v <= 3; ++v) box.put(snapshot_from_params(DenseVec{1.0f}, v), v * 10);
  for (std::uint64_t v = 1; v <= 3; ++v) {
    const auto e = box.take();
    CHECK(e->snap->version() == v);
    CHECK(e->avail_ns == v * 10);
  }
  CHECK_THROWS_AS(box.put(snapshot_from_params(DenseVec{1.0f}, 2)), ValidationError);
}

TEST_CASE("planes: transports are tagged and channels refuse the wrong plane") {
  auto control = std::make_shared<Transport>(Plane::Control, TransportMode::InProc);
  CHECK_THROWS_AS(DataChannel(2, control), UsageError);
  CHECK_THROWS_AS(ControlPlane(data_tx(TransportMode::InProc), 1), UsageError);
}

TEST_CASE("planes: abort wakes a blocked consumer") {
  DataChannel ch(2, data_tx(TransportMode::Wire));
  std::thread consumer([&] { CHECK_FALSE(ch.take().has_value()); });
  std::this_thread::sleep_for(20ms);
  ch.abort();
  consumer.join();
}
