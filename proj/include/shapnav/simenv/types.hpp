#pragma once

// Frame convention: x north, y east, z up (altitude above ground). Yaw is
// measured from +x toward +y, so a positive yaw rate turns the vehicle right
// and a positive angle error means the goal lies to the right.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/nncore/tensor.hpp"

namespace shapnav::sim {

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

struct Vec2 {
  double x = 0, y = 0;
};
struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct WorldConfig {
  double side_length = 200.0;
  int obstacle_count = 25;
  double radius_min = 2.0, radius_max = 8.0;
  double height_min = 8.0, height_max = 30.0;
  double goal_radius = 70.0;
  double accept_radius = 2.0;
  double flight_height = 5.0;
  double altitude_margin = 10.0;  // ceiling = flight_height + altitude_margin
  int max_episode_steps = 400;
  std::uint64_t rng_seed = 0;
  int placement_retries = 1000;

  static WorldConfig paper() { return {}; }
  static WorldConfig desk() {
    WorldConfig w;
    w.side_length = 100.0;
    w.obstacle_count = 10;
    w.goal_radius = 30.0;
    return w;
  }
};

struct CameraConfig {
  int width = 64;
  int height = 48;
  double fov_h_deg = 90.0;
  double fov_v_deg = 67.5;
  double max_range = 20.0;
};

struct DynamicsConfig {
  double dt = 0.1;   // 10 Hz control
  double tau = 0.3;  // first-order velocity tracking time constant
};

struct RewardConfig {
  double d_safe = 5.0;
  double d_min = 1.0;
  double w_obs = 0.5;
  double w_act = 0.1;
  double w_pos = 0.1;
  double success_reward = 10.0;
  double clamp_low = -1.0;
  double clamp_high = 1.0;
};

// Velocity setpoints in physical units: m/s, m/s, rad/s.
struct ActionCommand {
  double v_xy = 0.0;
  double v_z = 0.0;
  double yaw_rate = 0.0;

  std::array<double, 3> as_array() const { return {v_xy, v_z, yaw_rate}; }
  static ActionCommand from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
  bool operator==(const ActionCommand&) const = default;
};

struct ActionLimits {
  double v_xy_max = 5.0;  // forward speed range [0, v_xy_max]
  double v_z_max = 2.0;   // vertical speed range [-v_z_max, v_z_max]
  double yaw_rate_max_deg = 45.0;

  double yaw_rate_max() const { return deg2rad(yaw_rate_max_deg); }
  std::array<double, 3> low() const { return {0.0, -v_z_max, -yaw_rate_max()}; }
  std::array<double, 3> high() const { return {v_xy_max, v_z_max, yaw_rate_max()}; }
  std::array<double, 3> scale() const { return {v_xy_max / 2.0, v_z_max, yaw_rate_max()}; }
  std::array<double, 3> offset() const { return {v_xy_max / 2.0, 0.0, 0.0}; }

  // Physical command -> [-1, 1]^3.
  std::array<double, 3> normalize(const ActionCommand& c) const {
    auto a = c.as_array();
    auto s = scale(), o = offset();
    return {(a[0] - o[0]) / s[0], (a[1] - o[1]) / s[1], (a[2] - o[2]) / s[2]};
  }
  ActionCommand denormalize(const std::array<double, 3>& n) const {
    auto s = scale(), o = offset();
    return {n[0] * s[0] + o[0], n[1] * s[1] + o[1], n[2] * s[2] + o[2]};
  }
  bool contains(const ActionCommand& c, double tol = 1e-5) const {
    auto a = c.as_array();
    auto lo = low(), hi = high();
    for (int i = 0; i < 3; ++i)
      if (!(a[i] >= lo[i] - tol && a[i] <= hi[i] + tol)) return false;
    return true;
  }
  ActionCommand clamp(const ActionCommand& c) const {
    auto a = c.as_array();
    auto lo = low(), hi = high();
    for (int i = 0; i < 3; ++i) a[i] = std::min(std::max(a[i], lo[i]), hi[i]);
    return ActionCommand::from_array(a);
  }
};

struct EnvConfig {
  WorldConfig world;
  CameraConfig camera;
  DynamicsConfig dynamics;
  RewardConfig reward;
  ActionLimits limits;
};

inline void validate(const EnvConfig& c) {
  const auto& w = c.world;
  if (!(w.side_length > 0)) throw ConfigError("world.side must be > 0");
  if (!(w.accept_radius > 0 && w.accept_radius < w.goal_radius && w.goal_radius < w.side_length / 2))
    throw ConfigError("world config requires 0 < accept_radius < goal_radius < side/2");
  if (w.obstacle_count < 0) throw ConfigError("world.obstacles must be >= 0");
  if (!(w.radius_min > 0 && w.radius_min <= w.radius_max)) throw ConfigError("obstacle radius range invalid");
  if (!(w.height_min > 0 && w.height_min <= w.height_max)) throw ConfigError("obstacle height range invalid");
  if (!(w.flight_height > 0)) throw ConfigError("world.flight-height must be > 0");
  if (!(w.altitude_margin > 0)) throw ConfigError("world.altitude-margin must be > 0");
  if (w.max_episode_steps < 1) throw ConfigError("world.max-steps must be >= 1");
  if (w.placement_retries < 1) throw ConfigError("world.placement-retries must be >= 1");
  const auto& r = c.reward;
  if (!(r.d_min > 0 && r.d_min < r.d_safe)) throw ConfigError("reward requires 0 < d_min < d_safe");
  if (r.w_obs < 0 || r.w_act < 0 || r.w_pos < 0) throw ConfigError("reward weights must be >= 0");
  if (!(r.clamp_low < r.clamp_high)) throw ConfigError("reward clamp bounds inverted");
  const auto& cam = c.camera;
  if (cam.width < 1 || cam.height < 1) throw ConfigError("camera size must be positive");
  if (!(cam.fov_h_deg > 0 && cam.fov_h_deg < 180 && cam.fov_v_deg > 0 && cam.fov_v_deg < 180))
    throw ConfigError("camera field of view must lie in (0, 180) degrees");
  if (!(cam.max_range > 0)) throw ConfigError("camera max range must be > 0");
  if (!(c.dynamics.dt > 0 && c.dynamics.tau > 0)) throw ConfigError("dynamics dt and tau must be > 0");
  if (!(c.limits.v_xy_max > 0 && c.limits.v_z_max > 0 && c.limits.yaw_rate_max_deg > 0))
    throw ConfigError("action limits must be > 0");
}

struct Obstacle {
  Vec2 center;
  double radius = 1.0;
  double height = 1.0;
};

struct World {
  double side_length = 200.0;
  double flight_height = 5.0;
  std::vector<Obstacle> obstacles;
  Vec3 goal;
  std::uint64_t seed = 0;
};

struct UavState {
  Vec3 position;
  double yaw = 0.0;
  double v_xy = 0.0;
  double v_z = 0.0;
  double yaw_rate = 0.0;
  ActionCommand command;  // last applied setpoint
};

// Raw state features, physical units.
struct StateFeatures {
  double d_xy = 0, d_z = 0, angle_error = 0, v_xy = 0, v_z = 0, yaw_rate = 0;

  std::array<double, 6> as_array() const { return {d_xy, d_z, angle_error, v_xy, v_z, yaw_rate}; }
};

inline constexpr std::array<const char*, 6> kStateFeatureNames{"d_xy", "d_z", "angle_error",
                                                               "v_xy", "v_z", "yaw_rate"};

// Per-feature [0, 1] normalization:
//   d_xy / 100, (d_z + 10) / 20, (xi + pi) / 2pi, v_xy / v_xy_max,
//   (v_z + v_z_max) / 2 v_z_max, (phi + phi_max) / 2 phi_max, clamped to [0, 1].
struct StateNormalization {
  double d_xy_range = 100.0;
  double d_z_range = 10.0;

  std::array<float, 6> apply(const StateFeatures& f, const ActionLimits& lim) const {
    auto c = [](double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); };
    return {c(f.d_xy / d_xy_range),
            c((f.d_z + d_z_range) / (2 * d_z_range)),
            c((f.angle_error + kPi) / (2 * kPi)),
            c(f.v_xy / lim.v_xy_max),
            c((f.v_z + lim.v_z_max) / (2 * lim.v_z_max)),
            c((f.yaw_rate + lim.yaw_rate_max()) / (2 * lim.yaw_rate_max()))};
  }
};

struct Observation {
  nn::Tensor depth;            // (1, H, W), values in [0, 1]
  std::array<float, 6> state;  // normalized features
  StateFeatures raw;
};

enum class TerminalKind { none, success, crash, out_of_bounds, timeout };

inline const char* terminal_name(TerminalKind k) {
  switch (k) {
    case TerminalKind::none: return "none";
    case TerminalKind::success: return "success";
    case TerminalKind::crash: return "crash";
    case TerminalKind::out_of_bounds: return "out_of_bounds";
    case TerminalKind::timeout: return "timeout";
  }
  return "?";
}

struct RewardBreakdown {
  double r_goal = 0;
  double c_obs = 0;
  double c_act = 0;
  double c_pos = 0;
  double p_state = 0;
  double continuous_raw = 0;  // before clamping
  double reward = 0;
  bool success = false;
};

struct StepResult {
  Observation observation;
  double reward = 0;
  TerminalKind terminal = TerminalKind::none;
  RewardBreakdown components;
  double goal_distance = 0;      // d(s_t)
  double obstacle_distance = 0;  // d_obs(s_t)
};

}  // namespace shapnav::sim
