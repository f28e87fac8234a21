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

#include "playtest/rollout.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace playtest {
namespace {

std::uint8_t events_of(const EnvStep& r) {
  std::uint8_t e = 0;
  if (r.goal_reached) e |= kEventGoal;
  if (r.trap_entered) e |= kEventTrap;
  if (r.defect_crossed) e |= kEventDefect;
  if (r.reason == Termination::kTimeout) e |= kEventTimeout;
  if (r.reason == Termination::kAllGoals) e |= kEventAllGoals;
  return e;
}

void fill_transition(Transition& t, const Observation& obs, const WorldState& s,
                     const EnvStep& r) {
  for (int i = 0; i < Observation::kSize; ++i) {
    t.observation[i] = static_cast<float>(obs.values[i]);
  }
  t.reward = static_cast<float>(r.reward);
  t.done = r.done;
  t.events = events_of(r);
  t.position = {static_cast<float>(s.position.x), static_cast<float>(s.position.y),
                static_cast<float>(s.position.z)};
}

}  // namespace

std::size_t Chunk::decisions() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

void order_chunks(std::vector<Chunk>& chunks) {
  std::stable_sort(chunks.begin(), chunks.end(),
                   [](const Chunk& a, const Chunk& b) {
                     return std::tie(a.worker_id, a.seq) <
                            std::tie(b.worker_id, b.seq);
                   });
}

RolloutWorker::RolloutWorker(const LevelSpec& level, EnvConfig env,
                             int num_envs, int steps_per_env,
                             std::uint64_t seed)
    : level_(&level),
      env_(env),
      steps_per_env_(steps_per_env),
      seed_(seed),
      rng_(seed) {
  if (num_envs < 1 || steps_per_env < 1) {
    throw std::invalid_argument("worker needs >= 1 env and >= 1 step");
  }
  env_.validate();
  for (int e = 0; e < num_envs; ++e) {
    states_.push_back(env_reset(level, env_, seed_));
    obs_.push_back(observe(level, states_.back(), env_));
  }
}

std::vector<Trajectory> RolloutWorker::collect(const PolicyParams& policy,
                                               ActorMode mode) {
  const int n = num_envs();
  if (mode != ActorMode::kRandom &&
      (policy.arch().obs_dim != Observation::kSize ||
       policy.arch().act_dim != Action::kSize)) {
    throw std::invalid_argument("policy dims do not match the env");
  }
  std::vector<Trajectory> out(n);
  for (auto& t : out) t.steps.reserve(steps_per_env_);
  Eigen::MatrixXd x(Observation::kSize, n);
  const auto log_std = policy.log_std();
  std::array<double, Action::kSize> raw{};

  for (int step = 0; step < steps_per_env_; ++step) {
    ForwardCache fc;
    if (mode != ActorMode::kRandom) {
      for (int e = 0; e < n; ++e) {
        for (int i = 0; i < Observation::kSize; ++i) x(i, e) = obs_[e].values[i];
      }
      fc = forward_batch(policy, x);
    }
    for (int e = 0; e < n; ++e) {
      Transition t;
      double log_prob = 0.0;
      double value = 0.0;
      if (mode == ActorMode::kRandom) {
        for (auto& a : raw) a = rng_.uniform(-1.0, 1.0);
      } else {
        for (int i = 0; i < Action::kSize; ++i) {
          const double mu = fc.mean(i, e);
          raw[i] = mode == ActorMode::kMean
                       ? mu
                       : mu + std::exp(effective_log_std(log_std[i])) *
                                  rng_.gaussian();
        }
        const std::array<double, Action::kSize> mean{fc.mean(0, e), fc.mean(1, e),
                                                     fc.mean(2, e), fc.mean(3, e)};
        log_prob = gaussian_log_prob(mean, log_std, raw);
        value = fc.value(e);
      }
      const Action act = Action{raw[0], raw[1], raw[2], raw[3]}.clamped();
      const Observation before = obs_[e];
      const EnvStep r = env_step(*level_, states_[e], act, env_);
      fill_transition(t, before, states_[e], r);
      for (int i = 0; i < Action::kSize; ++i) t.action[i] = static_cast<float>(raw[i]);
      t.log_prob = static_cast<float>(log_prob);
      t.value = static_cast<float>(value);
      out[e].steps.push_back(t);
      if (r.done) {
        states_[e] = env_reset(*level_, env_, seed_);
        obs_[e] = observe(*level_, states_[e], env_);
      } else {
        obs_[e] = r.observation;
      }
      ++decisions_;
    }
  }

  if (mode != ActorMode::kRandom) {
    for (int e = 0; e < n; ++e) {
      for (int i = 0; i < Observation::kSize; ++i) x(i, e) = obs_[e].values[i];
    }
    const ForwardCache fc = forward_batch(policy, x);
    for (int e = 0; e < n; ++e) {
      out[e].bootstrap_value =
          out[e].steps.back().done ? 0.0f : static_cast<float>(fc.value(e));
    }
  }
  return out;
}

Trajectory run_episode(const LevelSpec& level, const EnvConfig& env,
                       const ActionFn& act, std::uint64_t seed) {
  Trajectory traj;
  WorldState s = env_reset(level, env, seed);
  Observation obs = observe(level, s, env);
  for (;;) {
    const Action a = act(s, obs).clamped();
    Transition t;
    const Observation before = obs;
    const EnvStep r = env_step(level, s, a, env);
    fill_transition(t, before, s, r);
    t.action = {static_cast<float>(a.forward), static_cast<float>(a.turn),
                static_cast<float>(a.strafe), static_cast<float>(a.jump)};
    traj.steps.push_back(t);
    obs = r.observation;
    if (r.done) break;
  }
  return traj;
}

void EpisodeTracker::consume(const Chunk& chunk, std::uint64_t frames_before,
                             std::vector<EpisodeEndRecord>& out) {
  // Decisions are numbered in batch order: trajectory by trajectory.
  std::uint64_t decision = 0;
  for (std::size_t e = 0; e < chunk.trajectories.size(); ++e) {
    Slot& slot = slots_[{chunk.worker_id, static_cast<std::uint32_t>(e)}];
    for (const auto& t : chunk.trajectories[e].steps) {
      ++decision;
      slot.ret += t.reward;
      slot.decisions += 1;
      if (t.events & kEventGoal) slot.goals += 1;
      if (!t.done) continue;
      EpisodeEndRecord rec;
      rec.final_position = {t.position[0], t.position[1], t.position[2]};
      rec.reason = (t.events & kEventAllGoals) ? Termination::kAllGoals
                                               : Termination::kTimeout;
      rec.decision_step = slot.decisions;
      rec.frame_index = frames_before + decision * static_cast<std::uint64_t>(action_repeat_);
      rec.goal_index = slot.goals;
      rec.episode_return = slot.ret;
      out.push_back(rec);
      slot = Slot{};
    }
  }
}

}  // namespace playtest
