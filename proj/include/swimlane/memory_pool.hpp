// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Arena pools over host memory. A ModelCompute pool holds long-lived
// parameters, gradients and optimizer moments; an EnvAux pool holds
// epoch-scoped environment scratch and is reset wholesale each epoch. The
// UnifiedBaseline kind serves both from one arena, which is what fragments.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string_view>

namespace swimlane {

enum class PoolKind : std::uint8_t { ModelCompute, EnvAux, UnifiedBaseline };

std::string_view to_string(PoolKind k) noexcept;

struct PoolHandle {
  std::uint32_t pool_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t generation = 0;

  friend bool operator==(const PoolHandle&, const PoolHandle&) = default;
};

struct PoolStats {
  std::uint64_t capacity = 0;
  std::uint64_t live_bytes = 0;
  std::uint64_t total_free = 0;
  std::uint64_t largest_free_block = 0;
  double fragmentation = 0.0;  // 1 - largest/total_free, 0 when nothing is free
  std::uint64_t failed_allocs = 0;
  std::uint64_t alloc_count = 0;
  std::uint64_t free_count = 0;
  std::uint64_t churn_bytes = 0;
  std::uint64_t free_extents = 0;
};

class Pool {
 public:
  // Throws ConfigError when capacity is 0.
  Pool(PoolKind kind, std::uint64_t capacity);

  PoolKind kind() const noexcept { return kind_; }
  std::uint32_t id() const noexcept { return id_; }
  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint64_t generation() const noexcept { return generation_; }

  // First fit at the requested alignment. Returns nullopt and counts a
  // failure when nothing fits. UsageError on size 0 or a non-power-of-two
  // alignment.
  std::optional<PoolHandle> alloc(std::uint64_t size, std::uint64_t align = 1);
  // UsageError on a stale generation, foreign pool or double free.
  void free(const PoolHandle& h);
  // EnvAux only; UsageError otherwise.
  void epoch_reset();

  bool valid(const PoolHandle& h) const noexcept;
  // Backing bytes of a live allocation.
  std::byte* data(const PoolHandle& h);

  PoolStats stats() const;
  // Free extents as (offset, size), ascending.
  const std::map<std::uint64_t, std::uint64_t>& free_extents() const noexcept { return free_; }

 private:
  PoolKind kind_;
  std::uint32_t id_;
  std::uint64_t capacity_;
  std::uint64_t generation_ = 0;
  std::map<std::uint64_t, std::uint64_t> free_;  // offset -> size
  std::map<std::uint64_t, std::uint64_t> live_;  // offset -> size
  std::uint64_t live_bytes_ = 0;
  std::uint64_t failed_ = 0;
  std::uint64_t allocs_ = 0;
  std::uint64_t frees_ = 0;
  std::uint64_t churn_ = 0;
  std::unique_ptr<std::byte[]> memory_;
};

}  // namespace swimlane
