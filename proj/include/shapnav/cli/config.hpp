#pragma once

// Run configuration, layered: defaults -> config file -> command-line overrides.
// Every key is "section.key"; the registry below is the full list.

#include <array>
#include <cstdint>
#include <functional>
#include <type_traits>
#include <string>
#include <vector>

#include "shapnav/agent/td3.hpp"
#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/nncore/architectures.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::cli {

struct RunConfig {
  std::string preset = "desk";
  sim::EnvConfig env;
  nn::ArchitectureConfig arch;
  agent::Td3Config td3;
  std::array<double, 3> band_fraction{0.1, 0.1, 0.1};
  int eval_episodes = 10;
  int report_trajectories = 20;
  std::uint64_t seed = 0;

  RunConfig() { env.world = sim::WorldConfig::desk(); }
};

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

template <class T, class F>
ConfigField number(std::string key, F access) {
  ConfigField f;
  f.key = key;
  f.get = [access](const RunConfig& c) {
    const T& v = access(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>)
      return fmt_num(v);
    else
      return std::to_string(v);
  };
  f.set = [access, key](RunConfig& c, const std::string& s) {
    if constexpr (std::is_floating_point_v<T>) {
      access(c) = static_cast<T>(parse_double(s, key));
    } else if constexpr (std::is_unsigned_v<T>) {
      auto v = parse_int(s, key);
      if (v < 0) throw ConfigError(key + " must be >= 0");
      access(c) = static_cast<T>(v);
    } else {
      access(c) = static_cast<T>(parse_int(s, key));
    }
  };
  return f;
}

inline std::string conv_text(const std::vector<nn::ConvStage>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i].channels) + "x" + std::to_string(v[i].kernel) + "s" +
         std::to_string(v[i].stride);
  return s;
}

// "8x5s2,16x3s2" -> channels x kernel s stride
inline std::vector<nn::ConvStage> parse_conv(const std::string& s) {
  std::vector<nn::ConvStage> out;
  for (const auto& tok : split(s, ',')) {
    auto x = tok.find('x'), st = tok.find('s');
    if (x == std::string::npos || st == std::string::npos || st < x)
      throw ConfigError("network.conv entry '" + tok + "' must look like 8x5s2");
    nn::ConvStage c{static_cast<int>(parse_int(tok.substr(0, x), "network.conv")),
                    static_cast<int>(parse_int(tok.substr(x + 1, st - x - 1), "network.conv")),
                    static_cast<int>(parse_int(tok.substr(st + 1), "network.conv"))};
    if (c.channels < 1 || c.kernel < 1 || c.stride < 1) throw ConfigError("network.conv values must be >= 1");
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("network.conv needs at least one stage");
  return out;
}

inline std::string ints_text(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<int> parse_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& tok : split(s, ',')) {
    int v = static_cast<int>(parse_int(tok, key));
    if (v < 1) throw ConfigError(key + " widths must be >= 1");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline const std::vector<ConfigField>& registry() {
  using detail::number;
  using C = RunConfig;
  static const std::vector<ConfigField> r = [] {
    std::vector<ConfigField> v;
    v.push_back({"world.preset", [](const C& c) { return c.preset; },
                 [](C& c, const std::string& s) {
                   if (s == "desk")
                     c.env.world = sim::WorldConfig::desk();
                   else if (s == "paper")
                     c.env.world = sim::WorldConfig::paper();
                   else
                     throw ConfigError("world.preset must be 'desk' or 'paper', got '" + s + "'");
                   c.preset = s;
                 }});
    v.push_back(number<double>("world.side", [](C& c) -> double& { return c.env.world.side_length; }));
    v.push_back(number<int>("world.obstacles", [](C& c) -> int& { return c.env.world.obstacle_count; }));
    v.push_back(number<double>("world.radius-min", [](C& c) -> double& { return c.env.world.radius_min; }));
    v.push_back(number<double>("world.radius-max", [](C& c) -> double& { return c.env.world.radius_max; }));
    v.push_back(number<double>("world.height-min", [](C& c) -> double& { return c.env.world.height_min; }));
    v.push_back(number<double>("world.height-max", [](C& c) -> double& { return c.env.world.height_max; }));
    v.push_back(number<double>("world.goal-radius", [](C& c) -> double& { return c.env.world.goal_radius; }));
    v.push_back(number<double>("world.accept-radius", [](C& c) -> double& { return c.env.world.accept_radius; }));
    v.push_back(number<double>("world.flight-height", [](C& c) -> double& { return c.env.world.flight_height; }));
    v.push_back(number<double>("world.altitude-margin", [](C& c) -> double& { return c.env.world.altitude_margin; }));
    v.push_back(number<int>("world.max-steps", [](C& c) -> int& { return c.env.world.max_episode_steps; }));
    v.push_back(number<int>("world.placement-retries", [](C& c) -> int& { return c.env.world.placement_retries; }));
    v.push_back(number<int>("camera.width", [](C& c) -> int& { return c.env.camera.width; }));
    v.push_back(number<int>("camera.height", [](C& c) -> int& { return c.env.camera.height; }));
    v.push_back(number<double>("camera.fov-h", [](C& c) -> double& { return c.env.camera.fov_h_deg; }));
    v.push_back(number<double>("camera.fov-v", [](C& c) -> double& { return c.env.camera.fov_v_deg; }));
    v.push_back(number<double>("camera.max-range", [](C& c) -> double& { return c.env.camera.max_range; }));
    v.push_back(number<double>("dynamics.dt", [](C& c) -> double& { return c.env.dynamics.dt; }));
    v.push_back(number<double>("dynamics.tau", [](C& c) -> double& { return c.env.dynamics.tau; }));
    v.push_back(number<double>("reward.d-safe", [](C& c) -> double& { return c.env.reward.d_safe; }));
    v.push_back(number<double>("reward.d-min", [](C& c) -> double& { return c.env.reward.d_min; }));
    v.push_back(number<double>("reward.w-obs", [](C& c) -> double& { return c.env.reward.w_obs; }));
    v.push_back(number<double>("reward.w-act", [](C& c) -> double& { return c.env.reward.w_act; }));
    v.push_back(number<double>("reward.w-pos", [](C& c) -> double& { return c.env.reward.w_pos; }));
    v.push_back(number<double>("reward.success", [](C& c) -> double& { return c.env.reward.success_reward; }));
    v.push_back(number<double>("reward.clamp-low", [](C& c) -> double& { return c.env.reward.clamp_low; }));
    v.push_back(number<double>("reward.clamp-high", [](C& c) -> double& { return c.env.reward.clamp_high; }));
    v.push_back(number<double>("action.v-xy-max", [](C& c) -> double& { return c.env.limits.v_xy_max; }));
    v.push_back(number<double>("action.v-z-max", [](C& c) -> double& { return c.env.limits.v_z_max; }));
    v.push_back(number<double>("action.yaw-rate-max-deg", [](C& c) -> double& { return c.env.limits.yaw_rate_max_deg; }));
    v.push_back({"network.conv", [](const C& c) { return detail::conv_text(c.arch.conv); },
                 [](C& c, const std::string& s) { c.arch.conv = detail::parse_conv(s); }});
    v.push_back({"network.head", [](const C& c) { return detail::ints_text(c.arch.head); },
                 [](C& c, const std::string& s) { c.arch.head = detail::parse_ints(s, "network.head"); }});
    v.push_back(number<int>("td3.batch-size", [](C& c) -> int& { return c.td3.batch_size; }));
    v.push_back(number<int>("td3.buffer-capacity", [](C& c) -> int& { return c.td3.buffer_capacity; }));
    v.push_back(number<double>("td3.gamma", [](C& c) -> double& { return c.td3.gamma; }));
    v.push_back(number<double>("td3.lr", [](C& c) -> double& { return c.td3.lr; }));
    v.push_back(number<int>("td3.warmup-steps", [](C& c) -> int& { return c.td3.warmup_steps; }));
    v.push_back(number<double>("td3.exploration-sigma", [](C& c) -> double& { return c.td3.exploration_sigma; }));
    v.push_back(number<int>("td3.policy-delay", [](C& c) -> int& { return c.td3.policy_delay; }));
    v.push_back(number<double>("td3.target-sigma", [](C& c) -> double& { return c.td3.target_sigma; }));
    v.push_back(number<double>("td3.target-clip", [](C& c) -> double& { return c.td3.target_clip; }));
    v.push_back(number<double>("td3.tau", [](C& c) -> double& { return c.td3.tau; }));
    v.push_back(number<long long>("td3.total-steps", [](C& c) -> long long& { return c.td3.total_steps; }));
    v.push_back(number<int>("td3.eval-interval", [](C& c) -> int& { return c.td3.eval_interval; }));
    v.push_back(number<int>("td3.eval-episodes", [](C& c) -> int& { return c.td3.eval_episodes; }));
    v.push_back(number<double>("explain.band-v-xy", [](C& c) -> double& { return c.band_fraction[0]; }));
    v.push_back(number<double>("explain.band-v-z", [](C& c) -> double& { return c.band_fraction[1]; }));
    v.push_back(number<double>("explain.band-yaw-rate", [](C& c) -> double& { return c.band_fraction[2]; }));
    v.push_back(number<int>("eval.episodes", [](C& c) -> int& { return c.eval_episodes; }));
    v.push_back(number<int>("report.trajectories", [](C& c) -> int& { return c.report_trajectories; }));
    v.push_back(number<std::uint64_t>("run.seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    return v;
  }();
  return r;
}

inline const ConfigField* find_field(const std::string& key) {
  for (const auto& f : registry())
    if (f.key == key) return &f;
  return nullptr;
}

inline void validate(const RunConfig& c) {
  sim::validate(c.env);
  agent::validate(c.td3);
  if (c.arch.head.empty()) throw ConfigError("network.head needs at least one layer");
  for (double f : c.band_fraction)
    if (!(f > 0 && f <= 1)) throw ConfigError("explain band fractions must lie in (0, 1]");
  if (c.eval_episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (c.report_trajectories < 1) throw ConfigError("report.trajectories must be >= 1");
}

// Applies `layer` on top of `c`. world.preset is applied first so that
// explicit world keys in the same layer win over the preset.
inline void apply(RunConfig& c, const KvConfig& layer) {
  for (const auto& [k, v] : layer.entries())
    if (!find_field(k)) throw ConfigError("unknown config key: " + k);
  if (auto* p = layer.find("world.preset")) find_field("world.preset")->set(c, *p);
  for (const auto& [k, v] : layer.entries())
    if (k != "world.preset") find_field(k)->set(c, v);
  c.arch.image = {1, c.env.camera.height, c.env.camera.width};
}

inline KvConfig to_kv(const RunConfig& c) {
  KvConfig kv;
  for (const auto& f : registry()) kv.set(f.key, f.get(c));
  return kv;
}

}  // namespace shapnav::cli
