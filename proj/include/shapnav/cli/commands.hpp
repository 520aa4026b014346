#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shapnav/agent/evaluate.hpp"
#include "shapnav/agent/trainer.hpp"
#include "shapnav/attrib/step.hpp"
#include "shapnav/cli/config.hpp"
#include "shapnav/error.hpp"
#include "shapnav/explain/local.hpp"
#include "shapnav/report/dataset.hpp"
#include "shapnav/report/export.hpp"
#include "shapnav/rng.hpp"
#include "shapnav/simenv/io.hpp"

namespace shapnav::cli {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string run_id;
  std::vector<std::string> overrides;  // raw "--section.key value" tokens
};

// Turns leftover "--a.b v" / "--a.b=v" tokens into a config layer.
inline KvConfig parse_overrides(const std::vector<std::string>& tokens) {
  KvConfig kv;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t.rfind("--", 0) != 0) throw ConfigError("unexpected argument: " + t);
    std::string key = t.substr(2), value;
    auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= tokens.size()) throw ConfigError("missing value for --" + key);
      value = tokens[++i];
    }
    if (key.find('.') == std::string::npos || !find_field(key)) throw ConfigError("unknown option or config key: --" + key);
    kv.set(key, value);
  }
  return kv;
}

inline RunConfig resolve(const CommonArgs& a) {
  RunConfig c;
  if (!a.config_path.empty()) {
    if (!fs::exists(a.config_path)) throw ConfigError("config file not found: " + a.config_path);
    apply(c, KvConfig::load(a.config_path));
  }
  apply(c, parse_overrides(a.overrides));
  if (a.seed) c.seed = *a.seed;
  validate(c);
  return c;
}

inline std::string default_run_id(std::uint64_t seed) {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return std::string(buf) + "-s" + std::to_string(seed);
}

// <out>/<command>/<run-id>, never reusing an existing directory.
inline fs::path make_run_dir(const CommonArgs& a, const std::string& command, const RunConfig& c) {
  fs::path base = fs::path(a.out) / command;
  std::string id = a.run_id.empty() ? default_run_id(c.seed) : a.run_id;
  fs::path dir = base / id;
  if (fs::exists(dir)) {
    if (!a.run_id.empty()) throw IoError("output directory already exists: " + dir.string());
    for (int k = 2; fs::exists(dir); ++k) dir = base / (id + "-" + std::to_string(k));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  to_kv(c).save(dir / "config.txt", "resolved run configuration");
  return dir;
}

// Accepts a policy directory or a training run directory.
inline fs::path policy_dir(const std::string& path) {
  fs::path p(path);
  if (fs::exists(p / "actor.spec")) return p;
  if (fs::exists(p / "checkpoints" / "best" / "actor.spec")) return p / "checkpoints" / "best";
  throw IoError("no actor checkpoint found at " + path);
}

inline agent::Policy load_checked(const fs::path& dir, const RunConfig& c) {
  auto p = agent::load_policy(dir, c.env.limits);
  if (p.spec.image.height != c.env.camera.height || p.spec.image.width != c.env.camera.width)
    throw ConfigError("checkpoint image size does not match camera.width/camera.height");
  return p;
}

inline void write_text(const fs::path& p, const std::string& s) { report::write_file(p, s); }

inline nlohmann::ordered_json eval_json(const agent::EvalResult& r, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["episodes"] = r.episodes;
  j["successes"] = r.successes;
  j["success_rate"] = r.success_rate;
  j["mean_reward"] = r.mean_reward;
  nlohmann::ordered_json eps = nlohmann::ordered_json::array();
  for (const auto& t : r.trajectories)
    eps.push_back({{"episode_seed", t.episode_seed},
                   {"length", t.steps.size()},
                   {"total_reward", t.total_reward},
                   {"outcome", sim::terminal_name(t.outcome)}});
  j["trajectories"] = eps;
  return j;
}

inline std::string episode_csv(const agent::Trajectory& t, double dt) {
  std::string s = std::string(sim::kEpisodeCsvHeader) + "\n";
  for (const auto& r : t.steps)
    s += sim::episode_csv_row(r.step * dt, r.features, r.action, r.components, r.terminal) + "\n";
  return s;
}

inline int cmd_train(const CommonArgs& a, std::optional<long long> steps, const std::string& resume, std::ostream& out) {
  RunConfig c = [&] {
    CommonArgs b = a;
    if (steps) b.overrides.insert(b.overrides.end(), {"--td3.total-steps", std::to_string(*steps)});
    return resolve(b);
  }();
  fs::path dir = make_run_dir(a, "train", c);
  agent::TrainOptions o;
  o.out_dir = dir;
  o.seed = c.seed;
  o.progress = &out;
  if (!resume.empty()) o.resume_from = resume;
  agent::Trainer t(c.env, c.arch, c.td3, o);
  auto s = t.run();
  out << "run " << dir.string() << "\n"
      << "steps " << s.steps << "  episodes " << s.episodes << "  best success " << fmt_num(s.best_success_rate)
      << " at step " << s.best_step << "\n";
  return 0;
}

inline int cmd_eval(const CommonArgs& a, const std::string& checkpoint, std::optional<int> episodes, std::ostream& out) {
  RunConfig c = resolve(a);
  if (episodes) {
    if (*episodes < 1) throw ConfigError("--episodes must be >= 1");
    c.eval_episodes = *episodes;
  }
  auto policy = load_checked(policy_dir(checkpoint), c);
  fs::path dir = make_run_dir(a, "eval", c);
  const std::uint64_t seed = mix_seed(c.seed, streams::final_eval_env);
  auto r = agent::evaluate(policy, c.env, c.eval_episodes, seed);
  fs::create_directories(dir / "trajectories");
  for (std::size_t i = 0; i < r.trajectories.size(); ++i)
    write_text(dir / "trajectories" / ("episode_" + std::to_string(i) + ".csv"),
               episode_csv(r.trajectories[i], c.env.dynamics.dt));
  write_text(dir / "eval.json", eval_json(r, seed).dump(2) + "\n");
  out << "success " << r.successes << "/" << r.episodes << " (" << fmt_num(r.success_rate) << ")  mean_reward "
      << fmt_num(r.mean_reward) << "\n";
  return 0;
}

struct ExplainArgs {
  std::string checkpoint;
  std::optional<std::uint64_t> episode_seed;
  std::optional<int> step;
  bool audit = false;
};

inline int cmd_explain(const CommonArgs& a, const ExplainArgs& e, std::ostream& out) {
  RunConfig c = resolve(a);
  auto policy = load_checked(policy_dir(e.checkpoint), c);
  fs::path dir = make_run_dir(a, "explain", c);
  const std::uint64_t seed = e.episode_seed ? *e.episode_seed : mix_seed(c.seed, streams::explain_env);
  auto head = attrib::HeadFragment::from_network(policy.spec, policy.params);
  auto ref = attrib::make_reference(policy.spec, policy.params, head, c.env);
  auto bands = explain::make_bands(explain::command_from(ref.outputs, c.env.limits), c.env.limits, c.band_fraction);
  const std::string episode = std::to_string(seed);
  std::ostringstream jsonl;
  int written = 0;
  int step = 0;
  auto act = [&](const sim::Observation& obs) {
    ++step;
    if (e.step && *e.step != step) return policy.act(obs);
    auto x = explain::explain_step(policy.spec, policy.params, head, obs, ref, bands, c.env.limits, step);
    for (std::size_t k = 0; k < 3; ++k)
      explain::render_saliency(x.saliency[k], obs.depth,
                               dir / (episode + "_" + std::to_string(step) + "_a" + std::to_string(k) + ".ppm"));
    jsonl << explain::to_json(x).dump() << "\n";
    ++written;
    return x.action;
  };
  sim::NavEnv env(c.env);
  auto traj = agent::run_episode(env, seed, act);
  if (e.step && *e.step > static_cast<int>(traj.steps.size()))
    throw ConfigError("--step " + std::to_string(*e.step) + " exceeds episode length " + std::to_string(traj.steps.size()));
  write_text(dir / (episode + ".jsonl"), jsonl.str());
  out << "episode " << episode << "  steps " << traj.steps.size() << "  outcome " << sim::terminal_name(traj.outcome)
      << "  explained " << written << "\n";
  if (e.audit) {
    std::istringstream in(jsonl.str());
    std::string line;
    int rows = 0, bad = 0;
    while (std::getline(in, line)) {
      auto j = nlohmann::ordered_json::parse(line);
      for (const auto& o : j.at("outputs")) bad += !attrib::attribution_from_json(o.at("attribution")).locally_accurate();
      ++rows;
    }
    out << "audit " << rows << " rows, " << bad << " local-accuracy failures\n";
    if (bad) throw ContractViolation("local-accuracy audit failed on " + std::to_string(bad) + " attributions");
  }
  return 0;
}

inline int cmd_report(const CommonArgs& a, const std::string& checkpoint, std::optional<int> trajectories,
                      std::ostream& out) {
  RunConfig c = resolve(a);
  if (trajectories) {
    if (*trajectories < 1) throw ConfigError("--trajectories must be >= 1");
    c.report_trajectories = *trajectories;
  }
  fs::path pdir = policy_dir(checkpoint);
  auto policy = load_checked(pdir, c);
  fs::path dir = make_run_dir(a, "report", c);
  const std::uint64_t seed = mix_seed(c.seed, streams::report_env);
  auto col = report::collect(policy, c.env, c.report_trajectories, seed);
  report::ExportInput in;
  in.dataset = &col.dataset;
  in.trajectories = &col.trajectories;
  in.reference_action = col.reference_action;
  in.manifest["seed"] = c.seed;
  in.manifest["episode_seed_base"] = seed;
  in.manifest["checkpoint_sha256"] = report::sha256_files(report::checkpoint_files(pdir));
  nlohmann::ordered_json cfg;
  const KvConfig kv = to_kv(c);
  for (const auto& [k, v] : kv.entries()) cfg[k] = v;
  in.manifest["config"] = cfg;
  report::export_report(in, dir);
  auto ranking = report::importance_ranking(col.dataset);
  auto dep = report::dependence_data(col.dataset, "angle_error", 2);
  std::string top_state;
  for (const auto& r : ranking[2])
    if (r.feature.rfind("CNN_", 0) != 0) {
      top_state = r.feature;
      break;
    }
  out << "report " << dir.string() << "  rows " << col.dataset.rows.size() << "\n"
      << "yaw_rate top state feature " << top_state << "  spearman(angle_error) " << report::fmt_opt(dep.spearman)
      << "\n";
  return 0;
}

// Returns the process exit code.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"shapnav: UAV navigation with TD3 and SHAP explanations"};
  app.require_subcommand(1);
  CommonArgs common;
  std::optional<long long> steps;
  std::string resume, checkpoint;
  std::optional<int> episodes, trajectories;
  ExplainArgs ex;
  std::uint64_t seed_value = 0;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", common.config_path, "config file (sectioned key = value)");
    s->add_option("--seed", seed_value, "global seed");
    s->add_option("--out", common.out, "output root")->capture_default_str();
    s->add_option("--run-id", common.run_id, "run directory name (default: UTC timestamp + seed)");
    s->allow_extras();
  };
  auto* train = app.add_subcommand("train", "train a TD3 agent");
  add_common(train);
  train->add_option("--steps", steps, "total environment steps (td3.total-steps)");
  train->add_option("--resume", resume, "resume from a checkpoints/resume directory");
  auto* eval = app.add_subcommand("eval", "noise-free evaluation of a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "policy or training run directory")->required();
  eval->add_option("--episodes", episodes, "episodes (default eval.episodes = 10)");
  auto* explain = app.add_subcommand("explain", "per-step explanation of one episode");
  add_common(explain);
  explain->add_option("--checkpoint", ex.checkpoint, "policy or training run directory")->required();
  explain->add_option("--episode-seed", ex.episode_seed, "episode seed");
  explain->add_option("--step", ex.step, "only write artifacts for this 1-based step");
  explain->add_flag("--audit", ex.audit, "re-check local accuracy of every written row");
  auto* rep = app.add_subcommand("report", "global explanation over many trajectories");
  add_common(rep);
  rep->add_option("--checkpoint", checkpoint, "policy or training run directory")->required();
  rep->add_option("--trajectories", trajectories, "trajectories (default report.trajectories = 20)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::config);
  }
  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--help")) return 0;
    common.overrides = sub->remaining();
    if (sub->count("--seed")) common.seed = seed_value;
    if (sub == train) return cmd_train(common, steps, resume, out);
    if (sub == eval) return cmd_eval(common, checkpoint, episodes, out);
    if (sub == explain) return cmd_explain(common, ex, out);
    return cmd_report(common, checkpoint, trajectories, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::io);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::io);
  }
}

}  // namespace shapnav::cli
