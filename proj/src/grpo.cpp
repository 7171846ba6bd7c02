// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "swimlane/errors.hpp"

namespace swimlane {

void GroupBatch::validate() const {
  if (chunk == 0 || horizon == 0) throw ValidationError("group " + std::to_string(group_id) + ": empty shape");
  const std::size_t nc = n_chunks();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    const bool ok = t.obs.size() == nc * obs_dim && t.actions.size() == nc * chunk * act_dim &&
                    t.behavior_log_prob.size() == nc &&
                    (t.behavior_substep_log_prob.empty() || t.behavior_substep_log_prob.size() == nc * chunk);
    if (!ok) {
      throw ValidationError("group " + std::to_string(group_id) + ": trajectory " + std::to_string(i) +
                            " has inconsistent sizes");
    }
    if (t.behavior_version != trajectories.front().behavior_version) {
      throw ValidationError("group " + std::to_string(group_id) + ": mixed behavior versions");
    }
  }
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo.group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("grpo.clip_eps must lie in (0, 1)");
  if (micro_batch < 1) throw ConfigError("grpo.micro_batch must be >= 1");
  if (!(lr > 0.0) || !(adv_epsilon >= 0.0) || !(opt_eps > 0.0)) throw ConfigError("grpo optimizer scalars invalid");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("grpo.beta1/beta2 must lie in [0, 1)");
  }
  if (kl_coef < 0.0) throw ConfigError("grpo.kl_coef must be >= 0");
}

std::vector<double> compute_advantages(const GroupBatch& batch, std::size_t group_size, double delta) {
  const auto& trajs = batch.trajectories;
  if (trajs.size() != group_size) {
    throw ValidationError("group " + std::to_string(batch.group_id) + " has " + std::to_string(trajs.size()) +
                          " trajectories, expected " + std::to_string(group_size));
  }
  // Scaled deviations d_i = n*r_i - sum(r) are exact in double for float
  // rewards, so a constant shift of every reward leaves them unchanged.
  const double n = static_cast<double>(trajs.size());
  double sum = 0.0;
  for (const auto& t : trajs) sum += t.reward;
  std::vector<double> adv(trajs.size(), 0.0);
  double ss = 0.0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    adv[i] = n * trajs[i].reward - sum;
    ss += adv[i] * adv[i];
  }
  if (ss == 0.0) {
    std::fill(adv.begin(), adv.end(), 0.0);
    return adv;
  }
  // (r_i - mean) / (popstd + delta) with both sides multiplied by n.
  const double denom = std::sqrt(ss / n) + n * delta;
  for (auto& a : adv) a /= denom;
  return adv;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  const double unclipped = ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  SurrogateTerm term;
  if (unclipped <= clipped) {
    term.loss = -unclipped;
    term.dloss_dratio = -advantage;
  } else {
    term.loss = -clipped;
    term.dloss_dratio = 0.0;
    term.clipped = true;
  }
  return term;
}

void adam_step(std::span<float> params, std::span<const float> grad, AdamState& state, const GrpoConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("adam_step: size mismatch");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] = static_cast<float>(params[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.opt_eps));
  }
}

namespace {

struct TrajRef {
  const GroupBatch* group;
  std::size_t index;
  double advantage;
};

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

[[noreturn]] void poisoned(const GroupBatch& g, const std::string& what) {
  throw NonFiniteUpdate(g.group_id, "non-finite " + what + " in group " + std::to_string(g.group_id));
}

}  // namespace

GradientShard grpo_gradient(const PolicyParams& params, std::span<const GroupBatch> batches, const GrpoConfig& cfg) {
  std::vector<const GroupBatch*> order;
  order.reserve(batches.size());
  for (const auto& b : batches) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const GroupBatch* a, const GroupBatch* b) { return a->group_id < b->group_id; });

  const bool substep = cfg.granularity == RatioGranularity::Substep;
  std::vector<TrajRef> refs;
  GradientShard out;
  out.grad.assign(params.param_count(), 0.0);
  for (const GroupBatch* g : order) {
    g->validate();
    const auto adv = compute_advantages(*g, cfg.group_size, cfg.adv_epsilon);
    for (std::size_t i = 0; i < g->trajectories.size(); ++i) {
      refs.push_back({g, i, adv[i]});
      const std::size_t per_traj = substep ? g->n_chunks() * g->chunk : g->n_chunks();
      out.terms += per_traj;
      out.reward_sum += g->trajectories[i].reward;
      if (substep && g->trajectories[i].behavior_substep_log_prob.empty()) {
        throw ValidationError("group " + std::to_string(g->group_id) +
                              ": substep ratio granularity needs per-substep behavior log-probs");
      }
    }
    ++out.groups;
  }
  out.trajectories = refs.size();
  if (out.terms == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.terms);

  std::vector<double> slice(out.grad.size(), 0.0);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < refs.size(); start += cfg.micro_batch) {
    const std::size_t stop = std::min(refs.size(), start + cfg.micro_batch);
    std::fill(slice.begin(), slice.end(), 0.0);
    for (std::size_t r = start; r < stop; ++r) {
      const GroupBatch& g = *refs[r].group;
      const Trajectory& t = g.trajectories[refs[r].index];
      const double adv = refs[r].advantage;
      if (!std::isfinite(t.reward) || !all_finite(t.obs) || !all_finite(t.actions)) poisoned(g, "trajectory data");
      const std::size_t act_len = static_cast<std::size_t>(g.chunk) * g.act_dim;
      for (std::size_t c = 0; c < g.n_chunks(); ++c) {
        std::span<const float> obs(t.obs.data() + c * g.obs_dim, g.obs_dim);
        std::span<const float> act(t.actions.data() + c * act_len, act_len);
        std::vector<double> logp;
        std::vector<double> behav;
        if (substep) {
          logp = substep_log_probs(params, obs, act);
          behav.assign(t.behavior_substep_log_prob.begin() + c * g.chunk,
                       t.behavior_substep_log_prob.begin() + (c + 1) * g.chunk);
        } else {
          logp = {log_prob_of(params, obs, act)};
          behav = {t.behavior_log_prob[c]};
        }
        std::vector<double> upstream(logp.size());
        for (std::size_t s = 0; s < logp.size(); ++s) {
          const double log_ratio = logp[s] - behav[s];
          const double ratio = std::exp(log_ratio);
          const SurrogateTerm term = clipped_surrogate(ratio, adv, cfg.clip_eps);
          double loss = term.loss;
          double up = term.dloss_dratio * ratio;
          if (cfg.kl_coef > 0.0) {
            const double inv_ratio = std::exp(-log_ratio);
            loss += cfg.kl_coef * (inv_ratio + log_ratio - 1.0);
            up += cfg.kl_coef * (1.0 - inv_ratio);
          }
          if (!std::isfinite(loss) || !std::isfinite(up)) poisoned(g, "loss");
          loss_sum += loss;
          out.ratio_sum += ratio;
          out.clipped += term.clipped ? 1 : 0;
          upstream[s] = up * inv_n;
        }
        accumulate_log_prob_grad(params, obs, act, upstream, slice);
      }
    }
    for (std::size_t i = 0; i < slice.size(); ++i) {
      if (!std::isfinite(slice[i])) poisoned(*refs[start].group, "gradient");
      out.grad[i] += slice[i];
    }
  }
  out.loss = loss_sum * inv_n;
  return out;
}

GradientShard reduce_shards(std::span<const GradientShard> shards) {
  if (shards.empty()) throw UsageError("reduce_shards: no shards");
  GradientShard out;
  out.grad.assign(shards.front().grad.size(), 0.0);
  for (const auto& s : shards) {
    if (s.grad.size() != out.grad.size()) throw UsageError("reduce_shards: gradient size mismatch");
    for (std::size_t i = 0; i < s.grad.size(); ++i) out.grad[i] += s.grad[i];
    out.loss += s.loss;
    out.ratio_sum += s.ratio_sum;
    out.clipped += s.clipped;
    out.terms += s.terms;
    out.trajectories += s.trajectories;
    out.groups += s.groups;
    out.reward_sum += s.reward_sum;
  }
  const double world = static_cast<double>(shards.size());
  for (double& g : out.grad) g /= world;
  out.loss /= world;
  return out;
}

UpdateStats apply_gradient(PolicyParams& params, const GradientShard& reduced, AdamState& state,
                           const GrpoConfig& cfg, std::uint64_t new_version) {
  double sq = 0.0;
  for (double g : reduced.grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NonFiniteUpdate(0, "non-finite reduced gradient norm");
  double scale = 1.0;
  if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm) scale = cfg.max_grad_norm / norm;

  std::vector<float> grad(reduced.grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<float>(reduced.grad[i] * scale);
  DenseVec flat = params.flatten();
  if (state.m.size() != flat.size()) state = AdamState::zeros(flat.size());
  adam_step(flat.span(), grad, state, cfg);
  params = PolicyParams::unflatten(
      PolicyConfig{params.w1.cols(), params.w1.rows(), params.w2.rows() / kActDim, kActDim, 0.0f}, flat.span());

  UpdateStats st;
  st.version = new_version;
  st.loss = reduced.loss;
  st.mean_ratio = reduced.terms ? reduced.ratio_sum / static_cast<double>(reduced.terms) : 0.0;
  st.clip_fraction = reduced.terms ? static_cast<double>(reduced.clipped) / static_cast<double>(reduced.terms) : 0.0;
  st.grad_norm = norm;
  st.groups = reduced.groups;
  st.trajectories = reduced.trajectories;
  st.mean_reward = reduced.trajectories ? reduced.reward_sum / static_cast<double>(reduced.trajectories) : 0.0;
  return st;
}

UpdateStats grpo_update(PolicyParams& params, std::span<const GroupBatch> batches, const GrpoConfig& cfg,
                        AdamState& state, std::uint64_t current_version) {
  const GradientShard shard = grpo_gradient(params, batches, cfg);
  const GradientShard reduced = reduce_shards(std::span<const GradientShard>(&shard, 1));
  return apply_gradient(params, reduced, state, cfg, current_version + 1);
}

}  // namespace swimlane
