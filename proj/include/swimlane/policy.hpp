// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-hidden-layer tanh MLP emitting the mean of a diagonal Gaussian over
// an action chunk (H consecutive actions). The log-std is a learned,
// state-independent vector. Forward and backward run in double precision
// on float parameters.
//
// Canonical flat order: W1 (row-major), b1, W2 (row-major), b2, log_std.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "swimlane/tensor.hpp"

namespace swimlane {

inline constexpr std::size_t kActDim = 2;

struct PolicyConfig {
  std::size_t obs_dim = 4;
  std::size_t hidden = 32;
  std::size_t chunk = 4;
  std::size_t act_dim = kActDim;
  float init_log_std = -0.5f;

  std::size_t out_dim() const noexcept { return chunk * act_dim; }
  std::size_t param_count() const noexcept;
  void validate() const;
};

struct PolicyParams {
  DenseMat w1;  // hidden x obs_dim
  DenseVec b1;
  DenseMat w2;  // chunk*act_dim x hidden
  DenseVec b2;
  DenseVec log_std;

  std::size_t param_count() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size() + log_std.size(); }
  DenseVec flatten() const;
  static PolicyParams unflatten(const PolicyConfig& cfg, std::span<const float> flat);
  static PolicyParams zeros(const PolicyConfig& cfg);

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct ActionChunk {
  DenseVec mean;
  DenseVec sampled;
  DenseVec eps;
  double log_prob = 0.0;
};

PolicyParams policy_init(const PolicyConfig& cfg, Rng& rng);

// mean = W2 tanh(W1 obs + b1) + b2. Throws UsageError on size mismatch.
DenseVec forward(const PolicyParams& params, std::span<const float> obs);

// sampled = mean + exp(log_std) * eps, eps ~ N(0, I).
ActionChunk sample_chunk(const PolicyParams& params, std::span<const float> obs, Rng& rng);

// Joint diagonal-Gaussian log-density over all chunk*act_dim dimensions.
double log_prob_of(const PolicyParams& params, std::span<const float> obs, std::span<const float> actions);

// Per-substep log-densities (act_dim dimensions each); they sum to log_prob_of.
std::vector<double> substep_log_probs(const PolicyParams& params, std::span<const float> obs,
                                      std::span<const float> actions);

// Gradient of upstream * log_prob_of w.r.t. every parameter, canonical order.
DenseVec backward(const PolicyParams& params, std::span<const float> obs, std::span<const float> actions,
                  double upstream);

// Accumulates sum_s upstream[s] * d log_prob_substep(s) / d theta into `grad`
// (length param_count). upstream.size() must be 1 (whole chunk) or chunk.
void accumulate_log_prob_grad(const PolicyParams& params, std::span<const float> obs, std::span<const float> actions,
                              std::span<const double> upstream, std::span<double> grad);

}  // namespace swimlane
