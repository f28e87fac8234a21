// Copyright 2026 The Playtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "playtest/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace playtest {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd gather(const Eigen::MatrixXd& m,
                       std::span<const Eigen::Index> index) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) out.col(j) = m.col(index[j]);
  return out;
}

// Per-sample log-probabilities of the batch actions under `params`.
Eigen::VectorXd log_probs(const PolicyParams& params, const Eigen::MatrixXd& mean,
                          const Eigen::MatrixXd& actions) {
  const auto ls = params.log_std();
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(mean.cols());
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    const double s = effective_log_std(ls[i]);
    const double inv = std::exp(-s);
    for (Eigen::Index j = 0; j < mean.cols(); ++j) {
      const double z = (actions(i, j) - mean(i, j)) * inv;
      lp[j] += -0.5 * z * z - s - kHalfLog2Pi;
    }
  }
  return lp;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("hidden must list >= 1 layer");
  if (envs_per_worker < 1) throw std::invalid_argument("envs_per_worker must be >= 1");
  if (checkpoint_interval < 1) {
    throw std::invalid_argument("checkpoint_interval must be >= 1");
  }
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw std::invalid_argument("gae: length mismatch");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * values[k + 1] * live - values[k];
    next = delta + gamma * lambda * live * next;
    out.advantages[k] = next;
    out.returns[k] = next + values[k];
  }
  return out;
}

GaeResult gae(const Trajectory& traj, double gamma, double lambda) {
  const std::size_t n = traj.steps.size();
  std::vector<double> r(n), v(n + 1);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = traj.steps[i].reward;
    v[i] = traj.steps[i].value;
    d[i] = traj.steps[i].done ? 1 : 0;
  }
  v[n] = traj.bootstrap_value;
  return gae(r, v, d, gamma, lambda);
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

Batch make_batch(std::span<const Trajectory> trajectories, double gamma,
                 double lambda) {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  Batch b;
  const auto cols = static_cast<Eigen::Index>(n);
  b.observations.resize(Observation::kSize, cols);
  b.actions.resize(Action::kSize, cols);
  b.old_log_prob.resize(cols);
  b.advantages.resize(cols);
  b.returns.resize(cols);
  Eigen::Index j = 0;
  for (const auto& t : trajectories) {
    const GaeResult g = gae(t, gamma, lambda);
    for (std::size_t k = 0; k < t.steps.size(); ++k, ++j) {
      const auto& s = t.steps[k];
      for (int i = 0; i < Observation::kSize; ++i) b.observations(i, j) = s.observation[i];
      for (int i = 0; i < Action::kSize; ++i) b.actions(i, j) = s.action[i];
      b.old_log_prob[j] = s.log_prob;
      b.advantages[j] = g.advantages[k];
      b.returns[j] = g.returns[k];
    }
  }
  return b;
}

LossTerms ppo_loss(const PolicyParams& params, const Batch& batch,
                   std::span<const Eigen::Index> index, const TrainConfig& cfg,
                   std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto m = static_cast<Eigen::Index>(index.size());
  const int act = params.arch().act_dim;
  const Eigen::MatrixXd x = gather(batch.observations, index);
  const Eigen::MatrixXd a = gather(batch.actions, index);
  const ForwardCache cache = forward_batch(params, x);
  const Eigen::VectorXd lp = log_probs(params, cache.mean, a);
  const auto ls = params.log_std();

  LossTerms t;
  Eigen::VectorXd d_logp(m);
  Eigen::RowVectorXd d_value(m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index src = index[j];
    const double adv = batch.advantages[src];
    const double log_ratio = lp[j] - batch.old_log_prob[src];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double s1 = ratio * adv;
    const double s2 = clipped * adv;
    t.policy -= std::min(s1, s2) * inv_m;
    d_logp[j] = s1 <= s2 ? -ratio * adv * inv_m : 0.0;
    if (std::abs(ratio - 1.0) > cfg.clip) t.clip_fraction += inv_m;
    t.approx_kl -= log_ratio * inv_m;

    const double err = cache.value[j] - batch.returns[src];
    t.value += err * err * inv_m;
    d_value[j] = 2.0 * cfg.value_coef * err * inv_m;
  }
  t.entropy = gaussian_entropy(ls);
  t.total = t.policy + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;

  // d logp / d mean = (a - mean) / var;  d logp / d log_std = z^2 - 1.
  Eigen::MatrixXd d_mean(act, m);
  Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(act);
  static const double kFloor = std::log(kMinStd);
  for (int i = 0; i < act; ++i) {
    const double s = effective_log_std(ls[i]);
    const bool live = ls[i] > kFloor;
    const double inv_var = std::exp(-2.0 * s);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double diff = a(i, j) - cache.mean(i, j);
      d_mean(i, j) = d_logp[j] * diff * inv_var;
      acc += d_logp[j] * (diff * diff * inv_var - 1.0);
    }
    d_log_std[i] = live ? acc - cfg.entropy_coef : 0.0;
  }
  backward(params, cache, d_mean, d_value, d_log_std, grad);
  return t;
}

double unclipped_surrogate(const PolicyParams& params, const Batch& batch,
                           std::span<const Eigen::Index> index) {
  const Eigen::MatrixXd x = gather(batch.observations, index);
  const Eigen::MatrixXd a = gather(batch.actions, index);
  const Eigen::VectorXd lp = log_probs(params, forward_batch(params, x).mean, a);
  double s = 0.0;
  for (std::size_t j = 0; j < index.size(); ++j) {
    s -= std::exp(lp[j] - batch.old_log_prob[index[j]]) *
         batch.advantages[index[j]];
  }
  return s / static_cast<double>(index.size());
}

double clipped_surrogate(const PolicyParams& params, const Batch& batch,
                         std::span<const Eigen::Index> index, double clip) {
  const Eigen::MatrixXd x = gather(batch.observations, index);
  const Eigen::MatrixXd a = gather(batch.actions, index);
  const Eigen::VectorXd lp = log_probs(params, forward_batch(params, x).mean, a);
  double s = 0.0;
  for (std::size_t j = 0; j < index.size(); ++j) {
    const double ratio = std::exp(lp[j] - batch.old_log_prob[index[j]]);
    const double adv = batch.advantages[index[j]];
    s -= std::min(ratio * adv,
                  std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv);
  }
  return s / static_cast<double>(index.size());
}

NonFiniteLoss::NonFiniteLoss(int epoch, int minibatch)
    : std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                         ", minibatch " + std::to_string(minibatch)),
      epoch_(epoch),
      minibatch_(minibatch) {}

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, Batch batch,
                       const TrainConfig& cfg, Rng& rng) {
  std::span<double> adv(batch.advantages.data(),
                        static_cast<std::size_t>(batch.advantages.size()));
  normalize_advantages(adv);

  PolicyParams work = params;
  AdamState opt = adam;
  const std::size_t p = work.size();
  if (opt.m.size() != p) {
    opt.m.assign(p, 0.0);
    opt.v.assign(p, 0.0);
    opt.t = 0;
  }
  std::vector<double> grad(p);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(batch.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<std::size_t>(cfg.minibatch);

  UpdateStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    int mb_index = 0;
    for (std::size_t start = 0; start < order.size(); start += mb, ++mb_index) {
      const std::size_t len = std::min(mb, order.size() - start);
      const std::span<const Eigen::Index> idx(order.data() + start, len);
      const LossTerms t = ppo_loss(work, batch, idx, cfg, grad);
      double sq = 0.0;
      for (double g : grad) sq += g * g;
      if (!std::isfinite(t.total) || !std::isfinite(sq)) {
        throw NonFiniteLoss(epoch, mb_index);
      }
      const double gnorm = std::sqrt(sq);
      const double scale =
          cfg.max_grad_norm > 0.0 && gnorm > cfg.max_grad_norm
              ? cfg.max_grad_norm / gnorm
              : 1.0;
      opt.t += 1;
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
      auto w = work.values();
      for (std::size_t i = 0; i < p; ++i) {
        const double g = grad[i] * scale;
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
        const double mhat = opt.m[i] / bc1;
        const double vhat = opt.v[i] / bc2;
        w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
      }
      stats.policy_loss += t.policy;
      stats.value_loss += t.value;
      stats.entropy += t.entropy;
      stats.clip_fraction += t.clip_fraction;
      stats.approx_kl += t.approx_kl;
      stats.grad_norm += gnorm;
      stats.minibatches += 1;
    }
  }
  if (stats.minibatches > 0) {
    const double k = 1.0 / stats.minibatches;
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.entropy *= k;
    stats.clip_fraction *= k;
    stats.approx_kl *= k;
    stats.grad_norm *= k;
  }
  work.set_version(params.version() + 1);
  params = std::move(work);
  adam = std::move(opt);
  return stats;
}

}  // namespace playtest
