#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "shapnav/agent/policy.hpp"
#include "shapnav/agent/replay.hpp"
#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/nncore/adam.hpp"
#include "shapnav/nncore/architectures.hpp"
#include "shapnav/nncore/checkpoint.hpp"
#include "shapnav/nncore/network.hpp"
#include "shapnav/rng.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::agent {

struct Td3Config {
  int batch_size = 128;
  int buffer_capacity = 50000;
  double gamma = 0.99;
  double lr = 3e-4;
  int warmup_steps = 2000;
  double exploration_sigma = 0.3;
  int policy_delay = 2;
  double target_sigma = 0.2;
  double target_clip = 0.5;
  double tau = 0.005;
  long long total_steps = 200000;
  int eval_interval = 2000;
  int eval_episodes = 10;
};

inline void validate(const Td3Config& c) {
  if (!(c.gamma > 0 && c.gamma < 1)) throw ConfigError("td3.gamma must lie in (0, 1)");
  if (!(c.lr > 0)) throw ConfigError("td3.lr must be > 0");
  if (!(c.tau >= 0 && c.tau <= 1)) throw ConfigError("td3.tau must lie in [0, 1]");
  if (c.batch_size < 1) throw ConfigError("td3.batch-size must be >= 1");
  if (c.buffer_capacity < c.batch_size) throw ConfigError("td3.buffer-capacity must be >= batch size");
  if (c.warmup_steps < 0) throw ConfigError("td3.warmup-steps must be >= 0");
  if (c.exploration_sigma < 0 || c.target_sigma < 0 || c.target_clip < 0)
    throw ConfigError("td3 noise parameters must be >= 0");
  if (c.policy_delay < 1) throw ConfigError("td3.policy-delay must be >= 1");
  if (c.total_steps < 0) throw ConfigError("td3.total-steps must be >= 0");
  if (c.eval_interval < 1) throw ConfigError("td3.eval-interval must be >= 1");
  if (c.eval_episodes < 1) throw ConfigError("td3.eval-episodes must be >= 1");
}

struct CriticLosses {
  double q1 = 0;
  double q2 = 0;
};

// y = r + gamma (1 - done) min(q1', q2').
inline float td3_target(float reward, float done, float q1_next, float q2_next, double gamma) {
  const float bootstrap = std::min(q1_next, q2_next);
  if (done != 0.0f) return reward;
  return reward + static_cast<float>(gamma) * bootstrap;
}

// target <- tau * online + (1 - tau) * target.
inline void soft_update(nn::ParamStore& target, const nn::ParamStore& online, double tau) {
  if (tau == 0.0) return;
  target.mutate([&](std::vector<nn::LayerParams<float>>& tv) {
    const auto& ov = online.values();
    if (tv.size() != ov.size()) throw ContractViolation("soft update between differently shaped stores");
    auto blend = [&](nn::Tensor& t, const nn::Tensor& o) {
      if (t.shape() != o.shape()) throw ContractViolation("soft update between differently shaped stores");
      if (tau == 1.0) {
        t = o;
        return;
      }
      const float a = static_cast<float>(tau), b = static_cast<float>(1.0 - tau);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = a * o[i] + b * t[i];
    };
    for (std::size_t k = 0; k < tv.size(); ++k) {
      blend(tv[k].weight, ov[k].weight);
      blend(tv[k].bias, ov[k].bias);
    }
  });
}

// Maps dL/d(normalized action) to dL/d(physical action) for tanh_scale outputs.
using CriticGradFn = std::function<nn::Tensor(const nn::Tensor& image, const nn::Tensor& state,
                                              const nn::Tensor& action_norm)>;

class Td3Agent {
 public:
  Td3Agent(const nn::ArchitectureConfig& arch, const sim::ActionLimits& limits, const Td3Config& cfg,
           std::uint64_t seed)
      : cfg_(cfg), limits_(limits), rng_(mix_seed(seed, streams::agent)) {
    validate(cfg_);
    actor_spec_ = make_actor_spec(arch, limits);
    critic_spec_ = nn::critic_spec(arch, 6, 3);
    actor = nn::ParamStore::initialize(actor_spec_, mix_seed(seed, streams::actor_init));
    critic1 = nn::ParamStore::initialize(critic_spec_, mix_seed(seed, streams::critic1_init));
    critic2 = nn::ParamStore::initialize(critic_spec_, mix_seed(seed, streams::critic2_init));
    actor_target = actor;
    critic1_target = critic1;
    critic2_target = critic2;
    actor_m = nn::AdamMoments::like(actor);
    critic1_m = nn::AdamMoments::like(critic1);
    critic2_m = nn::AdamMoments::like(critic2);
  }

  const Td3Config& config() const { return cfg_; }
  Td3Config& mutable_config() { return cfg_; }
  const sim::ActionLimits& limits() const { return limits_; }
  const nn::NetworkSpec& actor_spec() const { return actor_spec_; }
  const nn::NetworkSpec& critic_spec() const { return critic_spec_; }
  Rng& rng() { return rng_; }

  Policy policy() const { return {actor_spec_, actor, limits_}; }

  // Deterministic actor output in normalized action space.
  std::array<float, 3> act_normalized(const sim::Observation& obs) const {
    auto r = nn::forward(actor_spec_, actor, obs.depth, state_tensor(obs.state));
    return normalize_output(r.outputs.data());
  }

  // Normalized action with exploration. Uniform over the box during warmup.
  std::array<float, 3> select_normalized(const sim::Observation& obs, bool explore) {
    std::array<float, 3> a{};
    if (explore && env_steps < cfg_.warmup_steps) {
      for (auto& v : a) v = static_cast<float>(uniform(rng_, -1.0, 1.0));
      return a;
    }
    a = act_normalized(obs);
    if (explore && cfg_.exploration_sigma > 0)
      for (auto& v : a) v = std::clamp(v + static_cast<float>(gaussian(rng_, cfg_.exploration_sigma)), -1.0f, 1.0f);
    return a;
  }

  sim::ActionCommand select_action(const sim::Observation& obs, bool explore) {
    return to_command(select_normalized(obs, explore));
  }

  sim::ActionCommand to_command(const std::array<float, 3>& a) const {
    return limits_.clamp(limits_.denormalize({a[0], a[1], a[2]}));
  }

  CriticLosses critic_update(const Batch& b) {
    const int n = b.size();
    // target actions with clipped smoothing noise
    auto ta = nn::forward(actor_spec_, actor_target, b.next_image, b.next_state);
    nn::Tensor next_action({n, 3});
    for (int k = 0; k < n; ++k) {
      auto a = normalize_output(ta.outputs.data() + k * 3);
      for (int j = 0; j < 3; ++j) {
        double eps = cfg_.target_sigma > 0 ? gaussian(rng_, cfg_.target_sigma) : 0.0;
        eps = std::clamp(eps, -cfg_.target_clip, cfg_.target_clip);
        next_action[static_cast<std::size_t>(k * 3 + j)] =
            std::clamp(a[static_cast<std::size_t>(j)] + static_cast<float>(eps), -1.0f, 1.0f);
      }
    }
    nn::Tensor next_in = critic_input(b.next_state, next_action);
    auto q1t = nn::forward(critic_spec_, critic1_target, b.next_image, next_in);
    auto q2t = nn::forward(critic_spec_, critic2_target, b.next_image, next_in);
    std::vector<float> y(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      auto i = static_cast<std::size_t>(k);
      y[i] = td3_target(b.reward[i], b.done[i], q1t.outputs[i], q2t.outputs[i], cfg_.gamma);
    }
    nn::Tensor in = critic_input(b.state, b.action);
    CriticLosses losses;
    losses.q1 = regress(critic1, critic1_m, b.image, in, y);
    losses.q2 = regress(critic2, critic2_m, b.image, in, y);
    return losses;
  }

  // One actor ascent step on Q1, followed by the soft target update.
  double actor_update(const Batch& b) {
    double loss = improve_actor(b.image, b.state, [this](const nn::Tensor& img, const nn::Tensor& st,
                                                         const nn::Tensor& an) { return q1_action_grad(img, st, an); });
    soft_update(actor_target, actor, cfg_.tau);
    soft_update(critic1_target, critic1, cfg_.tau);
    soft_update(critic2_target, critic2, cfg_.tau);
    return loss;
  }

  // Actor gradient step maximizing a critic given only dQ/da (normalized).
  // Returns -mean Q as reported by the critic, or NaN when the callback does
  // not provide values.
  double improve_actor(const nn::Tensor& image, const nn::Tensor& state, const CriticGradFn& dq_da) {
    const int n = image.rank() == 4 ? image.dim(0) : 1;
    auto fwd = nn::forward(actor_spec_, actor, image, state);
    nn::Tensor an({n, 3});
    for (int k = 0; k < n; ++k) {
      auto a = normalize_output(fwd.outputs.data() + k * 3);
      for (int j = 0; j < 3; ++j) an[static_cast<std::size_t>(k * 3 + j)] = a[static_cast<std::size_t>(j)];
    }
    last_actor_q_ = std::nan("");
    nn::Tensor g = dq_da(image, state, an);
    if (g.size() != an.size()) throw ContractViolation("critic gradient has the wrong size");
    const auto scale = limits_.scale();
    nn::Tensor out_grad({n, 3});
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < 3; ++j) {
        auto i = static_cast<std::size_t>(k * 3 + j);
        out_grad[i] = static_cast<float>(-g[i] / (n * scale[static_cast<std::size_t>(j)]));
      }
    actor.zero_grad();
    nn::backward(fwd.trace, actor, out_grad, {true, false});
    nn::adam_step(actor, actor_m, adam());
    return last_actor_q_;
  }

  // dQ1/da at (image, state, normalized action); also records -mean Q1.
  nn::Tensor q1_action_grad(const nn::Tensor& image, const nn::Tensor& state, const nn::Tensor& an) {
    const int n = an.dim(0);
    auto q = nn::forward(critic_spec_, critic1, image, critic_input(state, an));
    double mean = 0;
    for (int k = 0; k < n; ++k) mean += q.outputs[static_cast<std::size_t>(k)];
    last_actor_q_ = -mean / n;
    nn::Tensor ones({n, 1}, 1.0f);
    auto grads = nn::backward(q.trace, critic1, ones, {false, false});
    nn::Tensor g({n, 3});
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < 3; ++j)
        g[static_cast<std::size_t>(k * 3 + j)] = grads.state[static_cast<std::size_t>(k * 9 + 6 + j)];
    return g;
  }

  struct TrainStats {
    CriticLosses critic;
    bool actor_updated = false;
    double actor_loss = 0;
  };

  TrainStats train_step(const ReplayBuffer& buffer) {
    TrainStats s;
    Batch b = buffer.sample(cfg_.batch_size, rng_);
    s.critic = critic_update(b);
    ++updates;
    if (updates % cfg_.policy_delay == 0) {
      s.actor_loss = actor_update(b);
      s.actor_updated = true;
    }
    return s;
  }

  // Full agent state except the replay buffer.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    save_policy(policy(), dir);
    nn::save_spec(critic_spec_, dir / "critic.spec");
    nn::save_params(critic1, dir / "critic1.ckpt");
    nn::save_params(critic2, dir / "critic2.ckpt");
    nn::save_params(actor_target, dir / "actor_target.ckpt");
    nn::save_params(critic1_target, dir / "critic1_target.ckpt");
    nn::save_params(critic2_target, dir / "critic2_target.ckpt");
    nn::save_moments(actor_m, dir / "actor_adam.ckpt");
    nn::save_moments(critic1_m, dir / "critic1_adam.ckpt");
    nn::save_moments(critic2_m, dir / "critic2_adam.ckpt");
    KvConfig c;
    c.set("agent.env_steps", std::to_string(env_steps));
    c.set("agent.updates", std::to_string(updates));
    std::ostringstream rs;
    rs << rng_;
    c.set("agent.rng", rs.str());
    c.save(dir / "agent.state", "shapnav agent counters");
  }

  void load(const std::filesystem::path& dir) {
    actor = nn::load_params(actor_spec_, dir / "actor.ckpt");
    critic1 = nn::load_params(critic_spec_, dir / "critic1.ckpt");
    critic2 = nn::load_params(critic_spec_, dir / "critic2.ckpt");
    actor_target = nn::load_params(actor_spec_, dir / "actor_target.ckpt");
    critic1_target = nn::load_params(critic_spec_, dir / "critic1_target.ckpt");
    critic2_target = nn::load_params(critic_spec_, dir / "critic2_target.ckpt");
    actor_m = nn::load_moments(actor, dir / "actor_adam.ckpt");
    critic1_m = nn::load_moments(critic1, dir / "critic1_adam.ckpt");
    critic2_m = nn::load_moments(critic2, dir / "critic2_adam.ckpt");
    auto c = KvConfig::load(dir / "agent.state");
    env_steps = parse_int(c.get("agent.env_steps"), "agent.env_steps");
    updates = parse_int(c.get("agent.updates"), "agent.updates");
    std::istringstream rs(c.get("agent.rng"));
    rs >> rng_;
    if (!rs) throw CorruptCheckpoint("bad rng state in " + (dir / "agent.state").string());
  }

  nn::ParamStore actor, critic1, critic2;
  nn::ParamStore actor_target, critic1_target, critic2_target;
  nn::AdamMoments actor_m, critic1_m, critic2_m;
  long long env_steps = 0;
  long long updates = 0;

 private:
  nn::AdamConfig adam() const {
    nn::AdamConfig a;
    a.lr = cfg_.lr;
    return a;
  }

  std::array<float, 3> normalize_output(const float* phys) const {
    auto s = limits_.scale(), o = limits_.offset();
    std::array<float, 3> a{};
    for (int j = 0; j < 3; ++j) {
      auto u = static_cast<std::size_t>(j);
      a[u] = std::clamp(static_cast<float>((phys[j] - o[u]) / s[u]), -1.0f, 1.0f);
    }
    return a;
  }

  static nn::Tensor critic_input(const nn::Tensor& state, const nn::Tensor& action) {
    const int n = static_cast<int>(state.size() / 6);
    nn::Tensor in({n, 9});
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < 6; ++j) in[static_cast<std::size_t>(k * 9 + j)] = state[static_cast<std::size_t>(k * 6 + j)];
      for (int j = 0; j < 3; ++j)
        in[static_cast<std::size_t>(k * 9 + 6 + j)] = action[static_cast<std::size_t>(k * 3 + j)];
    }
    return in;
  }

  double regress(nn::ParamStore& q, nn::AdamMoments& m, const nn::Tensor& image, const nn::Tensor& in,
                 const std::vector<float>& y) {
    const int n = static_cast<int>(y.size());
    auto f = nn::forward(critic_spec_, q, image, in);
    nn::Tensor g({n, 1});
    double loss = 0;
    for (int k = 0; k < n; ++k) {
      auto i = static_cast<std::size_t>(k);
      double d = static_cast<double>(f.outputs[i]) - y[i];
      loss += d * d;
      g[i] = static_cast<float>(2.0 * d / n);
    }
    loss /= n;
    if (!std::isfinite(loss))
      throw NumericError("non-finite critic loss at update " + std::to_string(updates) + " (env step " +
                         std::to_string(env_steps) + ")");
    q.zero_grad();
    nn::backward(f.trace, q, g, {true, false});
    nn::adam_step(q, m, adam());
    return loss;
  }

  Td3Config cfg_;
  sim::ActionLimits limits_;
  nn::NetworkSpec actor_spec_, critic_spec_;
  Rng rng_;
  double last_actor_q_ = std::nan("");
};

}  // namespace shapnav::agent
