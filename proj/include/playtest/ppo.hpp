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

#ifndef PLAYTEST_PPO_HPP_
#define PLAYTEST_PPO_HPP_

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "playtest/env.hpp"
#include "playtest/policy.hpp"

namespace playtest {

/// Event bits carried per transition for the analytics.
enum TransitionEvent : std::uint8_t {
  kEventGoal = 1 << 0,
  kEventTrap = 1 << 1,
  kEventDefect = 1 << 2,
  kEventTimeout = 1 << 3,
  kEventAllGoals = 1 << 4,
};

/// One decision. Stored in float32, the precision it travels at on the wire.
struct Transition {
  std::array<float, Observation::kSize> observation{};
  std::array<float, Action::kSize> action{};  // unclamped sample
  float log_prob = 0.0f;
  float value = 0.0f;
  float reward = 0.0f;
  bool done = false;
  std::uint8_t events = 0;
  std::array<float, 3> position{};  // agent position after the decision

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Consecutive decisions from one env instance. `bootstrap_value` estimates
/// the state after the last transition; unused when that transition is done.
struct Trajectory {
  std::vector<Transition> steps;
  float bootstrap_value = 0.0f;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int horizon = 8192;   // decisions per update
  int minibatch = 2048;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;
  std::uint64_t frame_budget = 1'000'000;  // env frames
  std::vector<int> hidden{256, 256};
  double log_std_init = -0.5;
  int envs_per_worker = 8;
  int checkpoint_interval = 10;  // iterations

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// `values` has one more entry than `rewards`: the bootstrap for the state
/// after the last step.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const std::uint8_t> dones, double gamma, double lambda);
GaeResult gae(const Trajectory& traj, double gamma, double lambda);

/// In place: mean 0, population std 1 (eps 1e-8 in the denominator).
void normalize_advantages(std::span<double> adv);

/// Flattened training batch; columns are samples.
struct Batch {
  Eigen::MatrixXd observations;  // obs_dim x n
  Eigen::MatrixXd actions;       // act_dim x n
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return old_log_prob.size(); }
};

Batch make_batch(std::span<const Trajectory> trajectories, double gamma,
                 double lambda);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;   // clipped surrogate, negated
  double value = 0.0;    // mean squared error (before the coefficient)
  double entropy = 0.0;  // per-sample entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Loss on the columns `index` of `batch` and its gradient w.r.t. params
/// (written to `grad`, which is overwritten).
LossTerms ppo_loss(const PolicyParams& params, const Batch& batch,
                   std::span<const Eigen::Index> index, const TrainConfig& cfg,
                   std::span<double> grad);

/// Same loss without the clip, for reference checks.
double unclipped_surrogate(const PolicyParams& params, const Batch& batch,
                           std::span<const Eigen::Index> index);
double clipped_surrogate(const PolicyParams& params, const Batch& batch,
                         std::span<const Eigen::Index> index, double clip);

/// First/second-moment adaptive step state.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;  // before clipping, averaged over minibatches
  int minibatches = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int epoch, int minibatch);
  int epoch() const { return epoch_; }
  int minibatch() const { return minibatch_; }

 private:
  int epoch_;
  int minibatch_;
};

/// Clipped-surrogate update over cfg.epochs shuffled passes. Normalises the
/// batch advantages first. On a non-finite loss nothing is committed and
/// NonFiniteLoss names the minibatch. Increments the params version.
UpdateStats ppo_update(PolicyParams& params, AdamState& adam, Batch batch,
                       const TrainConfig& cfg, Rng& rng);

}  // namespace playtest

#endif  // PLAYTEST_PPO_HPP_
