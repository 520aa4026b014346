// Criteria 6 and 7. By default checks the stored runs under the artifacts
// directory; with --train OUT the runs are first trained into OUT.
//
//   acceptance_train [--artifacts DIR] [--train OUT]

#include <sys/resource.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "harness.hpp"
#include "shapnav/cli/commands.hpp"

using namespace shapnav;
using acceptance::Outcome;
namespace fs = std::filesystem;

namespace {

constexpr double kDeskSuccess = 0.5;
constexpr double kSmokeSuccess = 0.8;
constexpr double kDeskCpuBudget = 4 * 3600.0;
constexpr double kSmokeCpuBudget = 3600.0;
constexpr int kDeskSeedsRequired = 2;
constexpr int kEvalEpisodes = 50;
constexpr int kReportTrajectories = 20;

struct RunSpec {
  std::string name;
  std::uint64_t seed;
  long long steps;
  int obstacles;
};

const std::vector<RunSpec> kDeskRuns{{"desk_s1", 1, 50000, 10}, {"desk_s2", 2, 50000, 10}, {"desk_s3", 3, 50000, 10}};
const RunSpec kSmokeRun{"smoke", 1, 30000, 0};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "shapnav");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

double cpu_seconds() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  auto s = [](const timeval& t) { return static_cast<double>(t.tv_sec) + 1e-6 * static_cast<double>(t.tv_usec); };
  return s(u.ru_utime) + s(u.ru_stime);
}

void train(const RunSpec& r, const fs::path& out) {
  const double t0 = cpu_seconds();
  auto res = cli({"train", "--out", out.string(), "--run-id", r.name, "--seed", std::to_string(r.seed), "--steps",
                  std::to_string(r.steps), "--world.obstacles", std::to_string(r.obstacles)});
  if (res.code != 0) throw IoError("training " + r.name + " failed: " + res.err);
  KvConfig t;
  t.set("timing.cpu_seconds", fmt_num(cpu_seconds() - t0));
  t.save(out / "train" / r.name / "cpu.txt", "CPU time of the training process");
}

struct RunCheck {
  bool setup_ok = false;  // config, step count and CPU budget
  double success = -1;
  double cpu = 0;
  std::string problem;
};

fs::path scratch_root() {
  static const fs::path p = [] {
    auto d = fs::temp_directory_path() / "shapnav_acceptance_train";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

RunCheck check_run(const fs::path& artifacts, const RunSpec& r, double cpu_budget) {
  RunCheck c;
  const fs::path dir = artifacts / r.name;
  if (!fs::exists(dir / "config.txt")) {
    c.problem = "missing " + (dir / "config.txt").string();
    return c;
  }
  auto cfg = KvConfig::load(dir / "config.txt");
  auto summary = KvConfig::load(dir / "summary.txt");
  c.cpu = std::stod(KvConfig::load(dir / "cpu.txt").get("timing.cpu_seconds"));
  const std::map<std::string, std::string> want{{"world.preset", "desk"},
                                                {"world.side", "100"},
                                                {"world.goal-radius", "30"},
                                                {"world.obstacles", std::to_string(r.obstacles)},
                                                {"td3.total-steps", std::to_string(r.steps)}};
  for (const auto& [k, v] : want)
    if (cfg.get(k) != v) c.problem += k + "=" + cfg.get(k) + " (want " + v + ") ";
  if (summary.get("summary.steps") != std::to_string(r.steps)) c.problem += "trained " + summary.get("summary.steps") + " steps ";
  if (c.cpu > cpu_budget) c.problem += "cpu " + fmt_num(c.cpu) + " s over budget ";
  c.setup_ok = c.problem.empty();
  auto ev = cli({"eval", "--config", (dir / "config.txt").string(), "--checkpoint", dir.string(), "--episodes",
                 std::to_string(kEvalEpisodes), "--out", scratch_root().string(), "--run-id", r.name});
  if (ev.code != 0) {
    c.problem += "eval failed: " + ev.err;
    c.setup_ok = false;
    return c;
  }
  auto j = nlohmann::json::parse(report::read_file(scratch_root() / "eval" / r.name / "eval.json"));
  c.success = j.at("success_rate").get<double>();
  return c;
}

std::string describe(const RunSpec& r, const RunCheck& c) {
  std::ostringstream s;
  s << r.name << " success " << fmt_num(c.success) << " cpu " << static_cast<long long>(c.cpu) << " s";
  if (!c.problem.empty()) s << " [" << c.problem << "]";
  return s.str();
}

std::vector<RunSpec> g_passing;

Outcome desk_training(const fs::path& artifacts) {
  int passing = 0;
  std::string detail;
  for (const auto& r : kDeskRuns) {
    auto c = check_run(artifacts, r, kDeskCpuBudget);
    const bool ok = c.setup_ok && c.success >= kDeskSuccess;
    if (ok) {
      ++passing;
      g_passing.push_back(r);
    }
    detail += describe(r, c) + (ok ? " ok; " : " below; ");
  }
  detail += std::to_string(passing) + " of 3 seeds at >= " + fmt_num(kDeskSuccess) + " over " + std::to_string(kEvalEpisodes) + " episodes";
  return {passing >= kDeskSeedsRequired, detail};
}

Outcome smoke_training(const fs::path& artifacts) {
  auto c = check_run(artifacts, kSmokeRun, kSmokeCpuBudget);
  return {c.setup_ok && c.success >= kSmokeSuccess, describe(kSmokeRun, c)};
}

// Reads the dependence summary row for (output, feature).
std::string summary_spearman(const std::string& text, const std::string& output, const std::string& feature) {
  std::istringstream in(text);
  std::string line;
  const std::string prefix = output + "," + feature + ",";
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) return line.substr(line.rfind(',') + 1);
  return "missing";
}

Outcome global_sanity(const fs::path& artifacts) {
  if (g_passing.empty()) return {false, "no seed passed the desk training check"};
  std::string detail;
  bool any = false;
  const std::vector<std::string> states(std::begin(sim::kStateFeatureNames), std::end(sim::kStateFeatureNames));
  for (const auto& r : g_passing) {
    const fs::path dir = artifacts / r.name;
    const std::string id = "global_" + r.name;
    auto rep = cli({"report", "--config", (dir / "config.txt").string(), "--checkpoint", dir.string(), "--trajectories",
                    std::to_string(kReportTrajectories), "--out", scratch_root().string(), "--run-id", id});
    if (rep.code != 0) {
      detail += r.name + " report failed: " + rep.err + "; ";
      continue;
    }
    const fs::path rd = scratch_root() / "report" / id;
    std::istringstream ranking(report::read_file(rd / "ranking_yaw_rate.csv"));
    std::string line, top;
    std::getline(ranking, line);
    while (top.empty() && std::getline(ranking, line)) {
      auto a = line.find(','), b = line.rfind(',');
      auto f = line.substr(a + 1, b - a - 1);
      if (std::find(states.begin(), states.end(), f) != states.end()) top = f;
    }
    const std::string rho = summary_spearman(report::read_file(rd / "dependence_summary.csv"), "yaw_rate", "angle_error");
    const bool ok = top == "angle_error" && rho != "undefined" && rho != "missing" && std::stod(rho) > 0;
    any = any || ok;
    detail += r.name + " top state " + top + " spearman " + rho + (ok ? " ok; " : " no; ");
  }
  return {any, detail + "stochastic: one passing seed suffices"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path artifacts = SHAPNAV_ARTIFACTS;
  std::string train_out;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--artifacts" && i + 1 < argc)
      artifacts = argv[++i];
    else if (a == "--train" && i + 1 < argc)
      train_out = argv[++i];
    else {
      std::fprintf(stderr, "usage: acceptance_train [--artifacts DIR] [--train OUT]\n");
      return 2;
    }
  }
  if (!train_out.empty()) {
    for (const auto& r : kDeskRuns) train(r, train_out);
    train(kSmokeRun, train_out);
    artifacts = fs::path(train_out) / "train";
  }
  std::printf("runs from %s\n", artifacts.string().c_str());
  int code = acceptance::run_all({
      {"6a", "desk-scale training", 0, [&] { return desk_training(artifacts); }},
      {"6b", "obstacle-free smoke training", 0, [&] { return smoke_training(artifacts); }},
      {"7", "global explanation sanity", 0, [&] { return global_sanity(artifacts); }},
  });
  fs::remove_all(scratch_root());
  return code;
}
