#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "shapnav/error.hpp"
#include "shapnav/nncore/tensor.hpp"
#include "shapnav/rng.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::sim {

inline double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

// Goal on the goal-radius circle around the take-off point, then obstacles
// placed by rejection sampling. An obstacle must keep its surface at least
// d_safe from the take-off point and d_min outside the goal acceptance
// sphere, and lie fully inside the world.
inline World generate_world(const WorldConfig& cfg, const RewardConfig& rc, std::uint64_t seed) {
  World w;
  w.side_length = cfg.side_length;
  w.flight_height = cfg.flight_height;
  w.seed = seed;
  Rng rng(seed);
  double theta = uniform(rng, 0.0, 2.0 * kPi);
  w.goal = {cfg.goal_radius * std::cos(theta), cfg.goal_radius * std::sin(theta), cfg.flight_height};
  const double half = cfg.side_length / 2.0;
  for (int i = 0; i < cfg.obstacle_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
      Obstacle o;
      o.radius = uniform(rng, cfg.radius_min, cfg.radius_max);
      o.height = uniform(rng, cfg.height_min, cfg.height_max);
      if (o.radius >= half) continue;
      o.center = {uniform(rng, -half + o.radius, half - o.radius), uniform(rng, -half + o.radius, half - o.radius)};
      double to_start = std::hypot(o.center.x, o.center.y);
      double to_goal = std::hypot(o.center.x - w.goal.x, o.center.y - w.goal.y);
      if (to_start < o.radius + rc.d_safe) continue;
      if (to_goal < o.radius + cfg.accept_radius + rc.d_min) continue;
      w.obstacles.push_back(o);
      placed = true;
    }
    if (!placed)
      throw ConfigError("could not place obstacle " + std::to_string(i) + " after " +
                        std::to_string(cfg.placement_retries) + " attempts");
  }
  return w;
}

// Distance from a point to a solid vertical cylinder standing on the ground.
inline double distance_to_cylinder(const Vec3& p, const Obstacle& o) {
  double rho = std::hypot(p.x - o.center.x, p.y - o.center.y);
  double dr = std::max(0.0, rho - o.radius);
  double dz = std::max(0.0, p.z - o.height);
  return std::hypot(dr, dz);
}

// Nearest distance to any cylinder or the four side walls. The ground is not
// an obstacle; leaving the altitude band is an out-of-bounds terminal instead.
inline double min_obstacle_distance(const Vec3& p, const World& w) {
  const double half = w.side_length / 2.0;
  double d = std::min(half - std::abs(p.x), half - std::abs(p.y));
  for (const auto& o : w.obstacles) d = std::min(d, distance_to_cylinder(p, o));
  return std::max(0.0, d);
}

// Nearest positive ray parameter hitting a cylinder (side wall or top cap).
// `dir` need not be unit length; the returned t is in units of `dir`.
inline double ray_cylinder(const Vec3& p, const Vec3& dir, const Obstacle& o) {
  double best = std::numeric_limits<double>::infinity();
  constexpr double eps = 1e-9;
  const double ox = p.x - o.center.x, oy = p.y - o.center.y;
  const double a = dir.x * dir.x + dir.y * dir.y;
  if (a > 0) {
    const double b = 2.0 * (ox * dir.x + oy * dir.y);
    const double c = ox * ox + oy * oy - o.radius * o.radius;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      double t = (-b - std::sqrt(disc)) / (2 * a);
      if (t > eps) {
        double z = p.z + t * dir.z;
        if (z >= 0 && z <= o.height) best = t;
      }
    }
  }
  if (dir.z != 0) {
    double t = (o.height - p.z) / dir.z;
    if (t > eps) {
      double x = ox + t * dir.x, y = oy + t * dir.y;
      if (x * x + y * y <= o.radius * o.radius) best = std::min(best, t);
    }
  }
  return best;
}

// Planar depth (distance along the optical axis) per pixel, clamped to the
// camera's max range. Returns shape (1, H, W). The camera is level and
// forward-facing at the vehicle position; row 0 is the top of the image.
inline nn::Tensor render_depth(const UavState& s, const World& w, const CameraConfig& cam) {
  nn::Tensor img({1, cam.height, cam.width}, static_cast<float>(cam.max_range));
  const double th = std::tan(deg2rad(cam.fov_h_deg) / 2), tv = std::tan(deg2rad(cam.fov_v_deg) / 2);
  const double cy = std::cos(s.yaw), sy = std::sin(s.yaw);
  const Vec3 fwd{cy, sy, 0}, right{-sy, cy, 0};
  const double reach = cam.max_range * std::sqrt(1 + th * th + tv * tv);
  std::vector<const Obstacle*> near;
  for (const auto& o : w.obstacles) {
    double dxy = std::hypot(s.position.x - o.center.x, s.position.y - o.center.y);
    if (dxy - o.radius > reach) continue;
    // behind the camera plane entirely
    double along = (o.center.x - s.position.x) * fwd.x + (o.center.y - s.position.y) * fwd.y;
    if (along + o.radius <= 0) continue;
    near.push_back(&o);
  }
  for (int v = 0; v < cam.height; ++v) {
    const double yn = 1.0 - 2.0 * (v + 0.5) / cam.height;
    for (int u = 0; u < cam.width; ++u) {
      const double xn = 2.0 * (u + 0.5) / cam.width - 1.0;
      const Vec3 dir{fwd.x + xn * th * right.x, fwd.y + xn * th * right.y, yn * tv};
      double t = std::numeric_limits<double>::infinity();
      if (dir.z < 0) t = -s.position.z / dir.z;
      for (const Obstacle* o : near) t = std::min(t, ray_cylinder(s.position, dir, *o));
      img[static_cast<std::size_t>(v) * cam.width + u] = static_cast<float>(std::min(t, cam.max_range));
    }
  }
  return img;
}

// Meters -> [0, 1] by min(d, max_range) / max_range.
inline nn::Tensor normalize_depth(nn::Tensor depth_m, double max_range) {
  for (auto& v : depth_m.values()) v = static_cast<float>(std::min<double>(v, max_range) / max_range);
  return depth_m;
}

}  // namespace shapnav::sim
