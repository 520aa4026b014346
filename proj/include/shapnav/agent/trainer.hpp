#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>

#include "shapnav/agent/evaluate.hpp"
#include "shapnav/agent/replay.hpp"
#include "shapnav/agent/td3.hpp"
#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/simenv/env.hpp"

namespace shapnav::agent {

inline constexpr const char* kTrainLogHeader =
    "episode,step,length,reward,terminal,success,critic1_loss,critic2_loss,actor_loss";
inline constexpr const char* kEvalLogHeader = "step,episodes,successes,success_rate,mean_reward";

struct TrainOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::ostream* progress = nullptr;
  std::filesystem::path resume_from;  // empty for a fresh run
};

struct TrainSummary {
  long long steps = 0;
  long long episodes = 0;
  double best_success_rate = -1;
  double best_mean_reward = 0;
  long long best_step = -1;
  double final_success_rate = 0;
};

inline bool is_done(sim::TerminalKind k) {
  return k == sim::TerminalKind::success || k == sim::TerminalKind::crash || k == sim::TerminalKind::out_of_bounds;
}

// Runs TD3 on `env_cfg` worlds. Writes under out_dir:
//   train_log.csv  one row per finished episode
//   eval_log.csv   one row per evaluation
//   checkpoints/best, checkpoints/final, checkpoints/resume
class Trainer {
 public:
  Trainer(sim::EnvConfig env_cfg, nn::ArchitectureConfig arch, Td3Config cfg, TrainOptions opts)
      : env_cfg_(std::move(env_cfg)),
        cfg_(cfg),
        opts_(std::move(opts)),
        agent_(arch, env_cfg_.limits, cfg, opts_.seed),
        buffer_(static_cast<std::size_t>(cfg.buffer_capacity), arch.image.channels, arch.image.height,
                arch.image.width) {
    sim::validate(env_cfg_);
    if (arch.image.height != env_cfg_.camera.height || arch.image.width != env_cfg_.camera.width ||
        arch.image.channels != 1)
      throw ConfigError("network image shape does not match the camera resolution");
  }

  Td3Agent& agent() { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  TrainSummary run() {
    namespace fs = std::filesystem;
    fs::create_directories(opts_.out_dir / "checkpoints");
    const std::uint64_t train_seed = mix_seed(opts_.seed, streams::train_env);
    const std::uint64_t eval_seed = mix_seed(opts_.seed, streams::eval_env);
    long long episode = 0;
    bool append = false;
    if (!opts_.resume_from.empty()) {
      agent_.load(opts_.resume_from);
      auto st = KvConfig::load(opts_.resume_from / "trainer.state");
      episode = parse_int(st.get("trainer.episode"), "trainer.episode");
      summary_.best_success_rate = parse_double(st.get("trainer.best_success_rate"), "best_success_rate");
      summary_.best_mean_reward = parse_double(st.get("trainer.best_mean_reward"), "best_mean_reward");
      summary_.best_step = parse_int(st.get("trainer.best_step"), "best_step");
      append = true;
    }
    std::ofstream train_log(opts_.out_dir / "train_log.csv", append ? std::ios::app : std::ios::trunc);
    std::ofstream eval_log(opts_.out_dir / "eval_log.csv", append ? std::ios::app : std::ios::trunc);
    if (!train_log || !eval_log) throw IoError("cannot write training logs in " + opts_.out_dir.string());
    if (!append) {
      train_log << kTrainLogHeader << "\n";
      eval_log << kEvalLogHeader << "\n";
    }

    sim::NavEnv env(env_cfg_);
    try {
      sim::Observation obs = env.reset(mix_seed(train_seed, static_cast<std::uint64_t>(episode)));
      double ep_reward = 0, c1 = 0, c2 = 0, al = 0;
      long long n_crit = 0, n_act = 0;
      while (agent_.env_steps < cfg_.total_steps) {
        auto a = agent_.select_normalized(obs, true);
        auto res = env.step(agent_.to_command(a));
        ++agent_.env_steps;
        Transition t{obs.depth, obs.state, a, static_cast<float>(res.reward), res.observation.depth,
                     res.observation.state, is_done(res.terminal)};
        buffer_.add(t);
        ep_reward += res.reward;
        if (agent_.env_steps > cfg_.warmup_steps && buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
          auto s = agent_.train_step(buffer_);
          c1 += s.critic.q1;
          c2 += s.critic.q2;
          ++n_crit;
          if (s.actor_updated) {
            al += s.actor_loss;
            ++n_act;
          }
        }
        if (res.terminal != sim::TerminalKind::none) {
          train_log << episode << "," << agent_.env_steps << "," << env.step_index() << "," << fmt_num(ep_reward)
                    << "," << sim::terminal_name(res.terminal) << ","
                    << (res.terminal == sim::TerminalKind::success ? 1 : 0) << ","
                    << fmt_num(n_crit ? c1 / n_crit : 0.0) << "," << fmt_num(n_crit ? c2 / n_crit : 0.0) << ","
                    << fmt_num(n_act ? al / n_act : 0.0) << "\n";
          ++episode;
          ep_reward = c1 = c2 = al = 0;
          n_crit = n_act = 0;
          obs = env.reset(mix_seed(train_seed, static_cast<std::uint64_t>(episode)));
        } else {
          obs = std::move(res.observation);
        }
        if (agent_.env_steps % cfg_.eval_interval == 0) {
          auto ev = evaluate(agent_.policy(), env_cfg_, cfg_.eval_episodes, eval_seed);
          eval_log << agent_.env_steps << "," << ev.episodes << "," << ev.successes << ","
                   << fmt_num(ev.success_rate) << "," << fmt_num(ev.mean_reward) << "\n";
          eval_log.flush();
          train_log.flush();
          if (opts_.progress)
            *opts_.progress << "step " << agent_.env_steps << "  success " << fmt_num(ev.success_rate)
                            << "  mean_reward " << fmt_num(ev.mean_reward) << std::endl;
          if (ev.success_rate > summary_.best_success_rate ||
              (ev.success_rate == summary_.best_success_rate && ev.mean_reward > summary_.best_mean_reward)) {
            summary_.best_success_rate = ev.success_rate;
            summary_.best_mean_reward = ev.mean_reward;
            summary_.best_step = agent_.env_steps;
            save_policy(agent_.policy(), opts_.out_dir / "checkpoints" / "best");
          }
          summary_.final_success_rate = ev.success_rate;
          save_resume(episode, env.step_index() == 0);
        }
      }
    } catch (const Error&) {
      save_resume(episode, false);
      throw;
    }
    agent_.save(opts_.out_dir / "checkpoints" / "final");
    summary_.steps = agent_.env_steps;
    summary_.episodes = episode;
    KvConfig s;
    s.set("summary.steps", std::to_string(summary_.steps));
    s.set("summary.episodes", std::to_string(summary_.episodes));
    s.set("summary.best_step", std::to_string(summary_.best_step));
    s.set("summary.best_success_rate", fmt_num(summary_.best_success_rate));
    s.set("summary.best_mean_reward", fmt_num(summary_.best_mean_reward));
    s.set("summary.final_success_rate", fmt_num(summary_.final_success_rate));
    s.save(opts_.out_dir / "summary.txt", "training summary");
    return summary_;
  }

 private:
  // An episode interrupted mid-way is abandoned; resume starts the next one.
  void save_resume(long long episode, bool at_boundary) {
    auto dir = opts_.out_dir / "checkpoints" / "resume";
    agent_.save(dir);
    KvConfig st;
    st.set("trainer.episode", std::to_string(at_boundary ? episode : episode + 1));
    st.set("trainer.best_success_rate", fmt_num(summary_.best_success_rate));
    st.set("trainer.best_mean_reward", fmt_num(summary_.best_mean_reward));
    st.set("trainer.best_step", std::to_string(summary_.best_step));
    st.save(dir / "trainer.state", "trainer counters");
  }

  sim::EnvConfig env_cfg_;
  Td3Config cfg_;
  TrainOptions opts_;
  Td3Agent agent_;
  ReplayBuffer buffer_;
  TrainSummary summary_;
};

}  // namespace shapnav::agent
