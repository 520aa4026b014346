#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "shapnav/error.hpp"
#include "shapnav/rng.hpp"
#include "shapnav/simenv/geometry.hpp"
#include "shapnav/simenv/reward.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::sim {

inline StateFeatures state_features(const UavState& s, const World& w) {
  StateFeatures f;
  f.d_xy = horizontal_distance(s.position, w.goal);
  f.d_z = w.goal.z - s.position.z;
  f.angle_error = wrap_angle(std::atan2(w.goal.y - s.position.y, w.goal.x - s.position.x) - s.yaw);
  f.v_xy = s.v_xy;
  f.v_z = s.v_z;
  f.yaw_rate = s.yaw_rate;
  return f;
}

inline Observation make_observation(const UavState& s, const World& w, const EnvConfig& cfg) {
  Observation o;
  o.depth = normalize_depth(render_depth(s, w, cfg.camera), cfg.camera.max_range);
  o.raw = state_features(s, w);
  o.state = StateNormalization{}.apply(o.raw, cfg.limits);
  return o;
}

inline UavState takeoff_state(const WorldConfig& cfg) {
  UavState s;
  s.position = {0.0, 0.0, cfg.flight_height};
  return s;
}

// Obstacle-free scene at flight height with the canonical reference state:
// d_xy = goal radius, everything else zero.
inline Observation reference_observation(const EnvConfig& cfg) {
  World empty;
  empty.side_length = cfg.world.side_length;
  empty.flight_height = cfg.world.flight_height;
  empty.goal = {cfg.world.goal_radius, 0.0, cfg.world.flight_height};
  return make_observation(takeoff_state(cfg.world), empty, cfg);
}

// Kinematic quadrotor in a cylinder world. Single-owner mutable.
class NavEnv {
 public:
  explicit NavEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

  const EnvConfig& config() const { return cfg_; }
  const World& world() const { return world_; }
  const UavState& state() const { return state_; }
  int step_index() const { return steps_; }
  bool terminal() const { return terminal_ != TerminalKind::none; }
  std::uint64_t episode_count() const { return episodes_; }

  // Next episode from the environment's own seed stream.
  Observation reset() { return reset(mix_seed(cfg_.world.rng_seed, episodes_)); }

  Observation reset(std::uint64_t episode_seed) {
    world_ = generate_world(cfg_.world, cfg_.reward, episode_seed);
    state_ = takeoff_state(cfg_.world);
    steps_ = 0;
    terminal_ = TerminalKind::none;
    ++episodes_;
    started_ = true;
    return make_observation(state_, world_, cfg_);
  }

  // Replaces the generated world (used by tests and scripted scenes).
  Observation reset_with_world(World w) {
    world_ = std::move(w);
    state_ = takeoff_state(cfg_.world);
    steps_ = 0;
    terminal_ = TerminalKind::none;
    ++episodes_;
    started_ = true;
    return make_observation(state_, world_, cfg_);
  }

  void set_state(const UavState& s) { state_ = s; }

  StepResult step(const ActionCommand& action) {
    if (!started_) throw ContractViolation("step called before reset");
    if (terminal()) throw ContractViolation("step called after a terminal state");
    if (!cfg_.limits.contains(action))
      throw ContractViolation("action outside the command range");
    const ActionCommand cmd = cfg_.limits.clamp(action);
    const UavState prev = state_;
    const double alpha = 1.0 - std::exp(-cfg_.dynamics.dt / cfg_.dynamics.tau);
    const double dt = cfg_.dynamics.dt;
    state_.command = cmd;
    state_.v_xy += alpha * (cmd.v_xy - state_.v_xy);
    state_.v_z += alpha * (cmd.v_z - state_.v_z);
    state_.yaw_rate += alpha * (cmd.yaw_rate - state_.yaw_rate);
    state_.yaw = wrap_angle(state_.yaw + state_.yaw_rate * dt);
    state_.position.x += state_.v_xy * std::cos(state_.yaw) * dt;
    state_.position.y += state_.v_xy * std::sin(state_.yaw) * dt;
    state_.position.z = std::max(0.0, state_.position.z + state_.v_z * dt);
    ++steps_;

    StepResult r;
    r.components = compute_reward(prev, state_, world_, cfg_.reward, cfg_.limits, cfg_.world.accept_radius);
    r.reward = r.components.reward;
    r.goal_distance = distance(state_.position, world_.goal);
    r.obstacle_distance = min_obstacle_distance(state_.position, world_);
    const double half = world_.side_length / 2.0;
    if (r.components.success) {
      terminal_ = TerminalKind::success;
    } else if (r.obstacle_distance < cfg_.reward.d_min) {
      terminal_ = TerminalKind::crash;
    } else if (std::abs(state_.position.x) > half || std::abs(state_.position.y) > half ||
               state_.position.z > cfg_.world.flight_height + cfg_.world.altitude_margin ||
               state_.position.z < cfg_.reward.d_min) {
      terminal_ = TerminalKind::out_of_bounds;
    } else if (steps_ >= cfg_.world.max_episode_steps) {
      terminal_ = TerminalKind::timeout;
    }
    r.terminal = terminal_;
    r.observation = make_observation(state_, world_, cfg_);
    return r;
  }

 private:
  EnvConfig cfg_;
  World world_;
  UavState state_;
  int steps_ = 0;
  TerminalKind terminal_ = TerminalKind::none;
  std::uint64_t episodes_ = 0;
  bool started_ = false;
};

}  // namespace shapnav::sim
