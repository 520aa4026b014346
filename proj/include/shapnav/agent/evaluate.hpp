#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "shapnav/agent/policy.hpp"
#include "shapnav/error.hpp"
#include "shapnav/rng.hpp"
#include "shapnav/simenv/env.hpp"

namespace shapnav::agent {

struct StepRecord {
  int step = 0;  // 1-based index of the step that produced this record
  sim::StateFeatures features;     // before the action
  std::array<float, 6> state{};    // normalized, before the action
  sim::ActionCommand action;
  double reward = 0;
  sim::RewardBreakdown components;
  sim::Vec3 position;  // after the action
  double yaw = 0;
  double goal_distance = 0;
  double obstacle_distance = 0;
  sim::TerminalKind terminal = sim::TerminalKind::none;
};

struct Trajectory {
  std::uint64_t episode_seed = 0;
  sim::World world;
  std::vector<StepRecord> steps;
  double total_reward = 0;
  sim::TerminalKind outcome = sim::TerminalKind::none;
  bool success() const { return outcome == sim::TerminalKind::success; }
};

struct EvalResult {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0;
  double mean_reward = 0;
  std::vector<Trajectory> trajectories;
};

using ActFn = std::function<sim::ActionCommand(const sim::Observation&)>;
// Called before each action with the current step's observation.
using StepHook = std::function<void(int step, const sim::Observation&, const sim::ActionCommand&)>;

inline Trajectory run_episode(sim::NavEnv& env, std::uint64_t episode_seed, const ActFn& act,
                              const StepHook& hook = {}) {
  Trajectory t;
  t.episode_seed = episode_seed;
  sim::Observation obs = env.reset(episode_seed);
  t.world = env.world();
  while (!env.terminal()) {
    sim::ActionCommand a = act(obs);
    StepRecord r;
    r.step = env.step_index() + 1;
    r.features = obs.raw;
    r.state = obs.state;
    r.action = a;
    if (hook) hook(r.step, obs, a);
    auto res = env.step(a);
    r.reward = res.reward;
    r.components = res.components;
    r.position = env.state().position;
    r.yaw = env.state().yaw;
    r.goal_distance = res.goal_distance;
    r.obstacle_distance = res.obstacle_distance;
    r.terminal = res.terminal;
    t.total_reward += res.reward;
    t.steps.push_back(r);
    obs = std::move(res.observation);
  }
  t.outcome = t.steps.empty() ? sim::TerminalKind::none : t.steps.back().terminal;
  return t;
}

// Noise-free evaluation; episode i uses seed mix_seed(seed, i), with fresh
// obstacles and goal per episode.
inline EvalResult evaluate(const ActFn& act, const sim::EnvConfig& cfg, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("evaluation needs at least 1 episode");
  sim::NavEnv env(cfg);
  EvalResult r;
  r.episodes = n;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    Trajectory t = run_episode(env, mix_seed(seed, static_cast<std::uint64_t>(i)), act);
    if (t.success()) ++r.successes;
    total += t.total_reward;
    r.trajectories.push_back(std::move(t));
  }
  r.success_rate = static_cast<double>(r.successes) / n;
  r.mean_reward = total / n;
  return r;
}

inline EvalResult evaluate(const Policy& p, const sim::EnvConfig& cfg, int n, std::uint64_t seed) {
  return evaluate([&p](const sim::Observation& o) { return p.act(o); }, cfg, n, seed);
}

}  // namespace shapnav::agent
