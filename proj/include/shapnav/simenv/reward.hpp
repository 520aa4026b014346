#pragma once

#include <algorithm>
#include <cmath>

#include "shapnav/simenv/geometry.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::sim {

// Obstacle proximity penalty, 0 at d_safe and beyond, 1 at d_min and below.
inline double obstacle_cost(double d_obs, const RewardConfig& cfg) {
  double c = (cfg.d_safe - d_obs) / (cfg.d_safe - cfg.d_min);
  return std::clamp(c, 0.0, 1.0);
}

// Mean absolute change of the commanded action, each component mapped to [0, 1].
inline double action_cost(const ActionCommand& prev, const ActionCommand& cur, const ActionLimits& lim) {
  auto lo = lim.low(), hi = lim.high();
  auto a = prev.as_array(), b = cur.as_array();
  double s = 0;
  for (int i = 0; i < 3; ++i) s += std::abs(b[i] - a[i]) / (hi[i] - lo[i]);
  return s / 3.0;
}

// Altitude error relative to the flight height, clamped to 1.
inline double position_cost(double d_z, double flight_height) {
  return std::min(1.0, std::abs(d_z) / flight_height);
}

// 10 on success; otherwise clamp(R_goal - P_state) with
// R_goal = d(prev) - d(cur) and P_state = w_obs C_obs + w_act C_act + w_pos C_pos.
inline RewardBreakdown compute_reward(const UavState& prev, const UavState& cur, const World& w,
                                      const RewardConfig& cfg, const ActionLimits& lim, double accept_radius) {
  RewardBreakdown r;
  const double d_prev = distance(prev.position, w.goal);
  const double d_cur = distance(cur.position, w.goal);
  r.r_goal = d_prev - d_cur;
  r.c_obs = obstacle_cost(min_obstacle_distance(cur.position, w), cfg);
  r.c_act = action_cost(prev.command, cur.command, lim);
  r.c_pos = position_cost(w.goal.z - cur.position.z, w.flight_height);
  r.p_state = cfg.w_obs * r.c_obs + cfg.w_act * r.c_act + cfg.w_pos * r.c_pos;
  r.continuous_raw = r.r_goal - r.p_state;
  r.success = d_cur <= accept_radius;
  r.reward = r.success ? cfg.success_reward : std::clamp(r.continuous_raw, cfg.clamp_low, cfg.clamp_high);
  return r;
}

}  // namespace shapnav::sim
