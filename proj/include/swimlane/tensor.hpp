// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense float containers, the deterministic RNG, and versioned parameter
// snapshots. Everything else in the library builds on these.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace swimlane {

class DenseVec {
 public:
  DenseVec() = default;
  explicit DenseVec(std::size_t n, float fill = 0.0f) : data_(n, fill) {}
  DenseVec(std::initializer_list<float> values) : data_(values) {}
  explicit DenseVec(std::vector<float> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> span() noexcept { return data_; }
  std::span<const float> span() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  const std::vector<float>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseVec&, const DenseVec&) = default;

 private:
  std::vector<float> data_;
};

// Row-major.
class DenseMat {
 public:
  DenseMat() = default;
  DenseMat(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> span() noexcept { return data_; }
  std::span<const float> span() const noexcept { return data_; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const DenseMat&, const DenseMat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// xoshiro256** seeded through SplitMix64.
//
// Substreams are derived by mixing the parent seed with each stream index
// through SplitMix64 in turn, so `Rng::substream(s, {a, b})` is a pure
// function of (s, a, b). Normals use the Box-Muller transform in double
// precision; both outputs of a pair are consumed before drawing again.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> indices);
  static std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> indices);

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

DenseVec gaussian(Rng& rng, std::size_t n);

// Immutable versioned parameter vector. Shared across lanes by
// `std::shared_ptr<const ParamSnapshot>`; there is no mutating API.
class ParamSnapshot {
 public:
  std::uint64_t version() const noexcept { return version_; }
  const DenseVec& params() const noexcept { return params_; }
  std::uint64_t hash() const noexcept;

 private:
  friend std::shared_ptr<const ParamSnapshot> snapshot_from_params(const DenseVec&, std::uint64_t);
  ParamSnapshot(DenseVec params, std::uint64_t version) : version_(version), params_(std::move(params)) {}

  const std::uint64_t version_;
  const DenseVec params_;
};

using SnapshotPtr = std::shared_ptr<const ParamSnapshot>;

// Deep copy; throws ValidationError on any non-finite entry.
SnapshotPtr snapshot_from_params(const DenseVec& params, std::uint64_t version);

// FNV-1a over the raw bytes of a float span.
std::uint64_t hash_floats(std::span<const float> values) noexcept;

}  // namespace swimlane
