// Criteria that need no trained model: 1, 2, 3, 4, 5, 8, 9.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "harness.hpp"
#include "shapnav/agent/policy.hpp"
#include "shapnav/attrib/step.hpp"
#include "shapnav/cli/commands.hpp"
#include "shapnav/explain/local.hpp"
#include "shapnav/simenv/env.hpp"
#include "support/gradcheck.hpp"

using namespace shapnav;
using acceptance::Outcome;
namespace fs = std::filesystem;

namespace {

constexpr double kEfficiencyTol = 1e-5;
constexpr double kLinearTol = 1e-6;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradStep = 1e-3;
constexpr int kEfficiencyInputs = 1000;
constexpr int kEfficiencyHeads = 5;
constexpr int kLinearHeads = 20;
constexpr int kLinearFeatures = 14;
constexpr int kGradTrials = 50;

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

attrib::HeadLayer dense(const attrib::MatD& w, const attrib::Vec& b) {
  attrib::HeadLayer l;
  l.kind = nn::LayerKind::dense;
  l.weight = w;
  l.bias = b;
  return l;
}

sim::EnvConfig desk_env() {
  sim::EnvConfig c;
  c.world = sim::WorldConfig::desk();
  return c;
}

Outcome efficiency() {
  const auto env = desk_env();
  nn::ArchitectureConfig arch;
  arch.image = {1, env.camera.height, env.camera.width};
  const auto spec = agent::make_actor_spec(arch, env.limits);
  std::mt19937_64 rng(11);
  std::size_t checked = 0, bad = 0;
  double worst = 0;
  for (int h = 0; h < kEfficiencyHeads; ++h) {
    auto params = nn::ParamStore::initialize(spec, 100 + static_cast<std::uint64_t>(h), 1.0);
    auto head = attrib::HeadFragment::from_network(spec, params);
    auto ref = attrib::make_reference(spec, params, head, env);
    const int n = head.input_width(), n_cnn = n - 6;
    std::uniform_real_distribution<double> cnn(0.0, 3.0), state(0.0, 1.0);
    for (int i = 0; i < kEfficiencyInputs; ++i) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = j < n_cnn ? cnn(rng) : state(rng);
      for (int k = 0; k < 3; ++k) {
        auto r = attrib::deepshap_attribute(head, x, ref.features, k, &ref.head_trace);
        const double delta = r.f_x - r.f_ref;
        const double gap = std::abs(r.phi_sum() - delta) / std::max(1.0, std::abs(delta));
        worst = std::max(worst, gap);
        bad += gap >= kEfficiencyTol;
        ++checked;
      }
    }
  }
  return {bad == 0, std::to_string(checked) + " attributions, " + std::to_string(bad) + " violations, worst relative gap " +
                        num(worst)};
}

Outcome linear_exactness() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0;
  for (int h = 0; h < kLinearHeads; ++h) {
    attrib::MatD w(3, kLinearFeatures);
    attrib::Vec b(3);
    for (int i = 0; i < 3; ++i) {
      b(i) = g(rng);
      for (int j = 0; j < kLinearFeatures; ++j) w(i, j) = g(rng);
    }
    attrib::HeadFragment head(kLinearFeatures, {dense(w, b)});
    std::vector<double> x(kLinearFeatures), ref(kLinearFeatures);
    for (auto& v : x) v = g(rng);
    for (auto& v : ref) v = g(rng);
    for (int k = 0; k < 3; ++k) {
      auto ds = attrib::deepshap_attribute(head, x, ref, k);
      auto ex = attrib::exact_shapley(attrib::head_predictor(head, k), x, ref, k);
      for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(ds.phi[i] - ex.phi[i]));
    }
  }
  return {worst < kLinearTol, std::to_string(kLinearHeads) + " heads x 3 outputs, max |deepshap - exact| " + num(worst)};
}

Outcome sensitivity() {
  attrib::MatD w1(1, 1), w2(1, 1);
  w1 << -1;
  w2 << -1;
  attrib::Vec b(1);
  b << 1;
  attrib::HeadLayer relu;
  attrib::HeadFragment head(1, {dense(w1, b), relu, dense(w2, b)});
  const double ds = attrib::deepshap_attribute(head, {2.0}, {0.0}, 0).phi[0];
  const double gr = attrib::gradient_attribution(head, {2.0}, {0.0}, 0).phi[0];
  return {ds == 1.0 && gr == 0.0, "deepshap " + num(ds) + ", gradient " + num(gr)};
}

Outcome gradients() {
  std::string detail;
  bool ok = true;
  for (auto kind : gradcheck::all_kinds()) {
    double worst = 0;
    for (int t = 0; t < kGradTrials; ++t) {
      auto r = gradcheck::check(kind, 1000 * static_cast<std::uint64_t>(kind) + static_cast<std::uint64_t>(t), kGradStep);
      worst = std::max(worst, r.max_rel_error);
    }
    ok = ok && worst < kGradRelTol;
    detail += std::string(nn::kind_name(kind)) + " " + num(worst) + "; ";
  }
  return {ok, "max rel error per kind: " + detail};
}

sim::UavState at(double x, double y, double z) {
  sim::UavState s;
  s.position = {x, y, z};
  return s;
}

Outcome reward_suite() {
  const sim::RewardConfig rc;
  const sim::ActionLimits lim;
  std::vector<std::string> failures;
  auto expect = [&](bool c, const std::string& what) {
    if (!c) failures.push_back(what);
  };
  expect(sim::obstacle_cost(5.0, rc) == 0.0, "C_obs(5) = 0");
  expect(sim::obstacle_cost(1.0, rc) == 1.0, "C_obs(1) = 1");
  expect(std::abs(sim::obstacle_cost(3.0, rc) - 0.5) < 1e-15, "C_obs(3) = 0.5");
  sim::World w;
  w.side_length = 1000;
  w.flight_height = 5;
  w.goal = {10, 0, 5};
  expect(sim::compute_reward(at(7, 0, 5), at(8.5, 0, 5), w, rc, lim, 2.0).reward == 10.0, "success = 10");
  // adversarial: huge jumps, saturated penalties, extreme commands
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> pos(-500, 500), cmd(-100, 100);
  int out_of_range = 0;
  for (int i = 0; i < 20000; ++i) {
    sim::World a;
    a.side_length = 1000;
    a.flight_height = 5;
    a.goal = {pos(rng), pos(rng), 5};
    a.obstacles.push_back({{pos(rng) * 0.01, pos(rng) * 0.01}, 2.0, 50.0});
    sim::UavState p = at(pos(rng), pos(rng), pos(rng)), c = at(pos(rng), pos(rng), pos(rng));
    if (i % 3 == 0) c = at(a.goal.x + 60, a.goal.y, 5);
    p.command = {cmd(rng), cmd(rng), cmd(rng)};
    c.command = {cmd(rng), cmd(rng), cmd(rng)};
    auto r = sim::compute_reward(p, c, a, rc, lim, 2.0);
    const bool ok = r.success ? r.reward == 10.0 : (r.reward >= -1.0 && r.reward <= 1.0);
    out_of_range += !ok;
  }
  expect(out_of_range == 0, std::to_string(out_of_range) + " adversarial rewards outside [-1, 1]");
  std::string detail = "3 C_obs cases, success, 20000 adversarial steps";
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "shapnav");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = report::read_file(e.path());
  return m;
}

const char* kSmallConfig = R"([world]
max-steps = 40
[camera]
width = 16
height = 12
[network]
conv = 4x3s2,3x3s2
head = 16
[td3]
batch-size = 16
buffer-capacity = 1000
warmup-steps = 100
total-steps = 400
eval-interval = 200
eval-episodes = 2
)";

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "shapnav_acceptance_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string cfg = (base / "small.cfg").string();
  report::write_file(cfg, kSmallConfig);
  std::vector<std::map<std::string, std::string>> trees;
  for (const std::string copy : {"a", "b"}) {
    const std::string out = (base / copy).string();
    auto common = [&](std::vector<std::string> v) {
      for (std::string s : {"--config", cfg.c_str(), "--out", out.c_str(), "--run-id", "r", "--seed", "21"})
        v.push_back(s);
      return v;
    };
    const std::string ckpt = out + "/train/r";
    for (auto& args : {common({"train"}), common({"eval", "--checkpoint", ckpt, "--episodes", "3"}),
                       common({"explain", "--checkpoint", ckpt}), common({"report", "--checkpoint", ckpt, "--trajectories", "3"})})
      if (int code = cli(args); code != 0) return {false, args[0] + " exited with " + std::to_string(code)};
    trees.push_back(tree(out));
  }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [k, v] : trees[0]) {
    auto it = trees[1].find(k);
    if (it == trees[1].end() || it->second != v) {
      if (!differing++) first = k;
    }
  }
  const bool same_set = trees[0].size() == trees[1].size();
  std::size_t bytes = 0;
  for (const auto& [k, v] : trees[0]) bytes += v.size();
  fs::remove_all(base);
  std::string detail = std::to_string(trees[0].size()) + " files (" + std::to_string(bytes) + " bytes) across train, eval, explain, report; " +
                       std::to_string(differing) + " differ";
  if (differing) detail += ", first " + first;
  return {same_set && differing == 0, detail};
}

Outcome explain_cost() {
  const auto env_cfg = desk_env();
  nn::ArchitectureConfig arch;
  arch.image = {1, env_cfg.camera.height, env_cfg.camera.width};
  agent::Policy p;
  p.spec = agent::make_actor_spec(arch, env_cfg.limits);
  p.params = nn::ParamStore::initialize(p.spec, 31, 1.0);
  p.limits = env_cfg.limits;
  auto head = attrib::HeadFragment::from_network(p.spec, p.params);
  auto ref = attrib::make_reference(p.spec, p.params, head, env_cfg);
  auto bands = explain::make_bands(explain::command_from(ref.outputs, env_cfg.limits), env_cfg.limits);
  sim::NavEnv env(env_cfg);
  auto obs = env.reset(41);
  auto& c = instrument::counters();
  int steps = 0, bad = 0;
  for (; steps < 30; ++steps) {
    c.reset();
    auto e = explain::explain_step(p.spec, p.params, head, obs, ref, bands, env_cfg.limits, steps + 1);
    bad += c.network_forward.load() != 1 || c.rescale_pass.load() != 3 || c.network_backward.load() != 0;
    auto r = env.step(e.action);
    if (r.terminal != sim::TerminalKind::none) obs = env.reset(42 + static_cast<std::uint64_t>(steps));
    else obs = r.observation;
  }
  return {bad == 0, std::to_string(steps) + " explained steps, " + std::to_string(bad) +
                        " with a count other than 1 forward, 3 rescale, 0 backward"};
}

}  // namespace

int main() {
  return acceptance::run_all({
      {"1", "attribution efficiency", 60, efficiency},
      {"2", "linear exactness", 60, linear_exactness},
      {"3", "sensitivity counterexample", 0, sensitivity},
      {"4", "gradient correctness", 120, gradients},
      {"5", "reward unit suite", 0, reward_suite},
      {"8", "determinism", 0, determinism},
      {"9", "explanation cost bound", 0, explain_cost},
  });
}
