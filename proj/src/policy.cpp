// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/policy.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "swimlane/errors.hpp"

namespace swimlane {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

struct Activations {
  std::vector<double> h;     // tanh(W1 x + b1)
  std::vector<double> mean;  // W2 h + b2
};

void check_obs(const PolicyParams& p, std::span<const float> obs) {
  if (obs.size() != p.w1.cols()) {
    throw UsageError("policy: observation has " + std::to_string(obs.size()) + " values, expected " +
                     std::to_string(p.w1.cols()));
  }
}

void check_actions(const PolicyParams& p, std::span<const float> actions) {
  if (actions.size() != p.w2.rows()) {
    throw UsageError("policy: action chunk has " + std::to_string(actions.size()) + " values, expected " +
                     std::to_string(p.w2.rows()));
  }
}

Activations run_forward(const PolicyParams& p, std::span<const float> obs) {
  check_obs(p, obs);
  Activations act;
  const std::size_t hidden = p.w1.rows();
  const std::size_t out = p.w2.rows();
  act.h.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double z = p.b1[j];
    const auto row = p.w1.row(j);
    for (std::size_t i = 0; i < obs.size(); ++i) z += static_cast<double>(row[i]) * obs[i];
    act.h[j] = std::tanh(z);
  }
  act.mean.resize(out);
  for (std::size_t d = 0; d < out; ++d) {
    double m = p.b2[d];
    const auto row = p.w2.row(d);
    for (std::size_t j = 0; j < hidden; ++j) m += static_cast<double>(row[j]) * act.h[j];
    act.mean[d] = m;
  }
  return act;
}

}  // namespace

std::size_t PolicyConfig::param_count() const noexcept {
  return hidden * obs_dim + hidden + out_dim() * hidden + 2 * out_dim();
}

void PolicyConfig::validate() const {
  if (obs_dim < 1 || hidden < 1 || chunk < 1) throw ConfigError("policy dimensions must all be >= 1");
  if (act_dim != kActDim) throw ConfigError("policy.act_dim must be 2");
  if (!std::isfinite(init_log_std)) throw ConfigError("policy.init_log_std must be finite");
}

DenseVec PolicyParams::flatten() const {
  std::vector<float> flat;
  flat.reserve(param_count());
  auto append = [&](std::span<const float> s) { flat.insert(flat.end(), s.begin(), s.end()); };
  append(w1.span());
  append(b1.span());
  append(w2.span());
  append(b2.span());
  append(log_std.span());
  return DenseVec(std::move(flat));
}

PolicyParams PolicyParams::zeros(const PolicyConfig& cfg) {
  PolicyParams p;
  p.w1 = DenseMat(cfg.hidden, cfg.obs_dim);
  p.b1 = DenseVec(cfg.hidden);
  p.w2 = DenseMat(cfg.out_dim(), cfg.hidden);
  p.b2 = DenseVec(cfg.out_dim());
  p.log_std = DenseVec(cfg.out_dim());
  return p;
}

PolicyParams PolicyParams::unflatten(const PolicyConfig& cfg, std::span<const float> flat) {
  if (flat.size() != cfg.param_count()) {
    throw UsageError("unflatten: expected " + std::to_string(cfg.param_count()) + " values, got " +
                     std::to_string(flat.size()));
  }
  PolicyParams p = PolicyParams::zeros(cfg);
  std::size_t off = 0;
  auto take = [&](std::span<float> dst) {
    std::copy(flat.begin() + off, flat.begin() + off + dst.size(), dst.begin());
    off += dst.size();
  };
  take(p.w1.span());
  take(p.b1.span());
  take(p.w2.span());
  take(p.b2.span());
  take(p.log_std.span());
  return p;
}

PolicyParams policy_init(const PolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  PolicyParams p = PolicyParams::zeros(cfg);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(cfg.obs_dim));
  for (float& w : p.w1.span()) w = static_cast<float>(rng.uniform(-b1, b1));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (float& w : p.w2.span()) w = static_cast<float>(rng.uniform(-b2, b2));
  for (float& s : p.log_std) s = cfg.init_log_std;
  return p;
}

DenseVec forward(const PolicyParams& params, std::span<const float> obs) {
  const Activations act = run_forward(params, obs);
  DenseVec mean(act.mean.size());
  for (std::size_t d = 0; d < act.mean.size(); ++d) mean[d] = static_cast<float>(act.mean[d]);
  return mean;
}

ActionChunk sample_chunk(const PolicyParams& params, std::span<const float> obs, Rng& rng) {
  const Activations act = run_forward(params, obs);
  const std::size_t n = act.mean.size();
  ActionChunk out;
  out.mean = DenseVec(n);
  out.sampled = DenseVec(n);
  out.eps = DenseVec(n);
  double lp = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const double eps = rng.normal();
    const double log_std = params.log_std[d];
    out.mean[d] = static_cast<float>(act.mean[d]);
    out.eps[d] = static_cast<float>(eps);
    out.sampled[d] = static_cast<float>(act.mean[d] + std::exp(log_std) * eps);
    lp += -0.5 * eps * eps - log_std - kHalfLog2Pi;
  }
  out.log_prob = lp;
  return out;
}

std::vector<double> substep_log_probs(const PolicyParams& params, std::span<const float> obs,
                                      std::span<const float> actions) {
  check_actions(params, actions);
  const Activations act = run_forward(params, obs);
  const std::size_t n = act.mean.size();
  const std::size_t act_dim = kActDim;
  const std::size_t substeps = n / act_dim;
  std::vector<double> out(substeps, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    const double log_std = params.log_std[d];
    const double z = (actions[d] - act.mean[d]) * std::exp(-log_std);
    out[d / act_dim] += -0.5 * z * z - log_std - kHalfLog2Pi;
  }
  return out;
}

double log_prob_of(const PolicyParams& params, std::span<const float> obs, std::span<const float> actions) {
  check_actions(params, actions);
  const Activations act = run_forward(params, obs);
  double lp = 0.0;
  for (std::size_t d = 0; d < act.mean.size(); ++d) {
    const double log_std = params.log_std[d];
    const double z = (actions[d] - act.mean[d]) * std::exp(-log_std);
    lp += -0.5 * z * z - log_std - kHalfLog2Pi;
  }
  return lp;
}

void accumulate_log_prob_grad(const PolicyParams& p, std::span<const float> obs, std::span<const float> actions,
                              std::span<const double> upstream, std::span<double> grad) {
  check_actions(p, actions);
  if (grad.size() != p.param_count()) throw UsageError("accumulate_log_prob_grad: gradient buffer size mismatch");
  const std::size_t n_out = p.w2.rows();
  const std::size_t act_dim = kActDim;
  if (upstream.size() != 1 && upstream.size() * act_dim != n_out) {
    throw UsageError("accumulate_log_prob_grad: upstream must be per chunk or per substep");
  }
  const Activations act = run_forward(p, obs);
  const std::size_t hidden = p.w1.rows();
  const std::size_t in = p.w1.cols();

  const std::size_t off_b1 = p.w1.size();
  const std::size_t off_w2 = off_b1 + hidden;
  const std::size_t off_b2 = off_w2 + p.w2.size();
  const std::size_t off_ls = off_b2 + n_out;

  std::vector<double> g_mean(n_out);
  for (std::size_t d = 0; d < n_out; ++d) {
    const double up = upstream.size() == 1 ? upstream[0] : upstream[d / act_dim];
    const double log_std = p.log_std[d];
    const double inv_var = std::exp(-2.0 * log_std);
    const double diff = actions[d] - act.mean[d];
    g_mean[d] = up * diff * inv_var;
    grad[off_ls + d] += up * (diff * diff * inv_var - 1.0);
    grad[off_b2 + d] += g_mean[d];
    for (std::size_t j = 0; j < hidden; ++j) grad[off_w2 + d * hidden + j] += g_mean[d] * act.h[j];
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    double gh = 0.0;
    for (std::size_t d = 0; d < n_out; ++d) gh += g_mean[d] * p.w2.at(d, j);
    const double gz = gh * (1.0 - act.h[j] * act.h[j]);
    grad[off_b1 + j] += gz;
    for (std::size_t i = 0; i < in; ++i) grad[j * in + i] += gz * obs[i];
  }
}

DenseVec backward(const PolicyParams& params, std::span<const float> obs, std::span<const float> actions,
                  double upstream) {
  std::vector<double> acc(params.param_count(), 0.0);
  const double up[1] = {upstream};
  accumulate_log_prob_grad(params, obs, actions, up, acc);
  DenseVec out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

}  // namespace swimlane
