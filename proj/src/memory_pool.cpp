// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/memory_pool.hpp"

#include <atomic>

#include <fmt/format.h>

#include "swimlane/errors.hpp"

namespace swimlane {

namespace {
std::atomic<std::uint32_t> g_next_pool_id{1};

std::string describe(const PoolHandle& h) {
  return fmt::format("handle(pool {}, offset {}, size {}, generation {})", h.pool_id, h.offset, h.size, h.generation);
}
}  // namespace

std::string_view to_string(PoolKind k) noexcept {
  switch (k) {
    case PoolKind::ModelCompute: return "model_compute";
    case PoolKind::EnvAux: return "env_aux";
    case PoolKind::UnifiedBaseline: return "unified_baseline";
  }
  return "?";
}

Pool::Pool(PoolKind kind, std::uint64_t capacity) : kind_(kind), id_(g_next_pool_id++), capacity_(capacity) {
  if (capacity == 0) throw ConfigError(fmt::format("{} pool capacity must be > 0", to_string(kind)));
  free_.emplace(0, capacity);
  memory_ = std::make_unique<std::byte[]>(capacity);
}

std::optional<PoolHandle> Pool::alloc(std::uint64_t size, std::uint64_t align) {
  if (size == 0) throw UsageError("pool alloc of 0 bytes");
  if (align == 0 || (align & (align - 1)) != 0) throw UsageError(fmt::format("alignment {} is not a power of two", align));
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    const std::uint64_t start = it->first;
    const std::uint64_t extent = it->second;
    const std::uint64_t aligned = (start + align - 1) & ~(align - 1);
    const std::uint64_t pad = aligned - start;
    if (pad > extent || extent - pad < size) continue;
    free_.erase(it);
    if (pad > 0) free_.emplace(start, pad);
    const std::uint64_t tail = extent - pad - size;
    if (tail > 0) free_.emplace(aligned + size, tail);
    live_.emplace(aligned, size);
    live_bytes_ += size;
    ++allocs_;
    churn_ += size;
    return PoolHandle{id_, aligned, size, generation_};
  }
  ++failed_;
  return std::nullopt;
}

bool Pool::valid(const PoolHandle& h) const noexcept {
  if (h.pool_id != id_ || h.generation != generation_) return false;
  const auto it = live_.find(h.offset);
  return it != live_.end() && it->second == h.size;
}

void Pool::free(const PoolHandle& h) {
  if (h.pool_id != id_) throw UsageError(fmt::format("{} freed into pool {}", describe(h), id_));
  if (h.generation != generation_) {
    throw UsageError(fmt::format("stale generation: {} but pool is at generation {}", describe(h), generation_));
  }
  const auto live = live_.find(h.offset);
  if (live == live_.end() || live->second != h.size) throw UsageError(fmt::format("double free of {}", describe(h)));
  live_.erase(live);
  live_bytes_ -= h.size;
  ++frees_;
  churn_ += h.size;

  std::uint64_t start = h.offset;
  std::uint64_t size = h.size;
  auto next = free_.lower_bound(start);
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == start) {
      start = prev->first;
      size += prev->second;
      free_.erase(prev);
    }
  }
  if (next != free_.end() && next->first == h.offset + h.size) {
    size += next->second;
    free_.erase(next);
  }
  free_.emplace(start, size);
}

void Pool::epoch_reset() {
  if (kind_ != PoolKind::EnvAux) {
    throw UsageError(fmt::format("epoch_reset on a {} pool; only env_aux pools are epoch-scoped", to_string(kind_)));
  }
  ++generation_;
  live_.clear();
  live_bytes_ = 0;
  free_.clear();
  free_.emplace(0, capacity_);
}

std::byte* Pool::data(const PoolHandle& h) {
  if (!valid(h)) throw UsageError(fmt::format("access through invalid {}", describe(h)));
  return memory_.get() + h.offset;
}

PoolStats Pool::stats() const {
  PoolStats s;
  s.capacity = capacity_;
  s.live_bytes = live_bytes_;
  for (const auto& [off, size] : free_) {
    s.total_free += size;
    s.largest_free_block = std::max(s.largest_free_block, size);
  }
  s.fragmentation = s.total_free == 0 ? 0.0 : 1.0 - static_cast<double>(s.largest_free_block) / s.total_free;
  s.failed_allocs = failed_;
  s.alloc_count = allocs_;
  s.free_count = frees_;
  s.churn_bytes = churn_;
  s.free_extents = free_.size();
  return s;
}

}  // namespace swimlane
