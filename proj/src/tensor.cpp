// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "swimlane/errors.hpp"

namespace swimlane {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

bool DenseVec::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = seed;
  for (std::uint64_t idx : indices) {
    std::uint64_t a = h;
    std::uint64_t b = idx ^ 0xD1B54A32D192ED03ULL;
    h = splitmix64(a) ^ rotl(splitmix64(b), 23);
  }
  return h;
}

Rng Rng::substream(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) {
  return Rng(mix_seed(seed, indices));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

DenseVec gaussian(Rng& rng, std::size_t n) {
  DenseVec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(rng.normal());
  return out;
}

std::uint64_t hash_floats(std::span<const float> values) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t ParamSnapshot::hash() const noexcept {
  return hash_floats(params_.span()) ^ (version_ * 0x9E3779B97F4A7C15ULL);
}

SnapshotPtr snapshot_from_params(const DenseVec& params, std::uint64_t version) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(params[i])) {
      throw ValidationError("non-finite parameter at index " + std::to_string(i));
    }
  }
  return SnapshotPtr(new ParamSnapshot(params, version));
}

}  // namespace swimlane
