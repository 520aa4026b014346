#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "shapnav/report/export.hpp"

using namespace shapnav;
using namespace shapnav::report;
namespace fs = std::filesystem;

namespace {

// Classic no-ties formula 1 - 6 sum d^2 / (n (n^2 - 1)).
double spearman_no_ties(const std::vector<double>& a, const std::vector<double>& b) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      r[i] = 1.0 + static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < v[i]; }));
    return r;
  };
  auto ra = rank(a), rb = rank(b);
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const double n = static_cast<double>(a.size());
  return 1 - 6 * d2 / (n * (n * n - 1));
}

AttributionDataset synthetic() {
  AttributionDataset ds;
  ds.n_cnn = 2;
  ds.features = attrib::feature_names(2);
  ds.trajectory_count = 2;
  for (int i = 0; i < 6; ++i) {
    DatasetRow r;
    r.trajectory = i / 3;
    r.step = i % 3 + 1;
    r.raw = {0.5 * i, 3.0, 10.0 - i, 0.1, -0.2 * i, 1.0, 0.5, 0.3 * i};
    r.normalized = {0, 0, i / 6.0, 0.5, 0.2, 0.9, 0.1, i / 10.0};
    for (std::size_t k = 0; k < 3; ++k) {
      r.phi[k].assign(8, 0.0);
      r.phi[k][2] = -0.1 * i * (k + 1);
      r.phi[k][7] = 0.05 * (k + 1);
      r.phi[k][0] = 1.0 / 3.0;
      r.f_x[k] = 0.1 * i + k;
      r.f_ref[k] = -1.0 / 7.0;
    }
    ds.rows.push_back(r);
  }
  normalize_cnn_columns(ds);
  return ds;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("shapnav_report_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Spearman, MatchesNoTiesFormula) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      a[i] = g(rng);
      b[i] = 0.5 * a[i] + g(rng);
    }
    EXPECT_NEAR(*spearman(a, b), spearman_no_ties(a, b), 1e-12);
  }
}

TEST(Spearman, MonotoneConstantAndTies) {
  EXPECT_DOUBLE_EQ(*spearman({1, 2, 3, 4}, {1, 4, 9, 16}), 1.0);
  EXPECT_DOUBLE_EQ(*spearman({1, 2, 3, 4}, {8, 4, 2, 1}), -1.0);
  EXPECT_FALSE(spearman({1, 2, 3}, {5, 5, 5}).has_value());
  EXPECT_FALSE(spearman({1}, {2}).has_value());
  EXPECT_THROW(spearman({1, 2}, {1}), ConfigError);
  EXPECT_EQ(average_ranks({10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
  // Pearson on ranks {1, 2.5, 2.5, 4} vs {1, 2, 3, 4}: 4.5 / sqrt(4.5 * 5)
  EXPECT_NEAR(*spearman({10, 20, 20, 30}, {1, 2, 3, 4}), 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
}

TEST(Dataset, CnnColumnsMinMaxScaled) {
  auto ds = synthetic();
  EXPECT_EQ(ds.rows[0].normalized[0], 0.0);
  EXPECT_EQ(ds.rows[5].normalized[0], 1.0);
  EXPECT_DOUBLE_EQ(ds.rows[2].normalized[0], 0.4);
  for (const auto& r : ds.rows) EXPECT_EQ(r.normalized[1], 0.0);  // constant column
}

TEST(Ranking, MeanAbsoluteAttribution) {
  auto ds = synthetic();
  auto r = importance_ranking(ds);
  // yaw_rate (k = 2): |phi| of d_xy averages 0.3 * 2.5 = 0.75, CNN_1 1/3, yaw_rate 0.15
  ASSERT_EQ(r[2].size(), 8u);
  EXPECT_EQ(r[2][0].feature, "d_xy");
  EXPECT_NEAR(r[2][0].mean_abs_phi, 0.75, 1e-12);
  EXPECT_EQ(r[2][1].feature, "CNN_1");
  EXPECT_EQ(r[2][2].feature, "yaw_rate");
  EXPECT_NEAR(r[2][2].mean_abs_phi, 0.15, 1e-12);
  // zero features tie and are ordered by name
  EXPECT_EQ(r[2][3].feature, "CNN_2");
  EXPECT_EQ(r[2][4].feature, "angle_error");
  EXPECT_THROW(importance_ranking(AttributionDataset{}), ConfigError);
}

TEST(Dependence, ValuesPhiAndCorrelation) {
  auto ds = synthetic();
  auto d = dependence_data(ds, "d_xy", 0);
  ASSERT_EQ(d.value.size(), 6u);
  EXPECT_DOUBLE_EQ(d.value[3], 0.5);
  EXPECT_DOUBLE_EQ(d.phi[3], -0.1 * 3);
  EXPECT_DOUBLE_EQ(*d.spearman, -1.0);
  EXPECT_FALSE(dependence_data(ds, "CNN_1", 1).spearman.has_value());
  EXPECT_THROW(dependence_data(ds, "nope", 0), ConfigError);
  EXPECT_THROW(dependence_data(ds, "d_xy", 3), ConfigError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  auto ds = synthetic();
  auto text = dataset_csv(ds);
  EXPECT_EQ(text.rfind("# schema=shapnav-dataset-1", 0), 0u);
  auto back = parse_dataset_csv(text);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.n_cnn, 2);
  EXPECT_EQ(back.trajectory_count, 2);
  ASSERT_EQ(back.rows.size(), ds.rows.size());
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].raw, ds.rows[i].raw);
    EXPECT_EQ(back.rows[i].normalized, ds.rows[i].normalized);
    EXPECT_EQ(back.rows[i].phi, ds.rows[i].phi);
    EXPECT_EQ(back.rows[i].f_ref, ds.rows[i].f_ref);
    EXPECT_EQ(back.rows[i].step, ds.rows[i].step);
  }
  EXPECT_EQ(dataset_csv(back), text);
}

TEST(DatasetCsv, RejectsWrongSchemaAndShape) {
  auto text = dataset_csv(synthetic());
  auto wrong = text;
  wrong.replace(wrong.find("dataset-1"), 9, "dataset-9");
  EXPECT_THROW(parse_dataset_csv(wrong), VersionError);
  EXPECT_THROW(parse_dataset_csv("trajectory,step\n"), ConfigError);
  auto cut = text.substr(0, text.rfind(',')) + "\n";
  EXPECT_THROW(parse_dataset_csv(cut), ConfigError);
}

TEST(Hash, KnownVectorAndConcatenation) {
  auto dir = scratch("hash");
  fs::create_directories(dir);
  write_file(dir / "a", "ab");
  write_file(dir / "b", "c");
  EXPECT_EQ(sha256_files({dir / "a", dir / "b"}), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_THROW(sha256_files({dir / "missing"}), IoError);
  fs::remove_all(dir);
}

class CollectFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.world = sim::WorldConfig::desk();
    cfg.world.max_episode_steps = 30;
    cfg.camera.width = 16;
    cfg.camera.height = 12;
    nn::ArchitectureConfig arch;
    arch.image = {1, 12, 16};
    arch.conv = {{4, 3, 2}, {3, 3, 2}};
    arch.head = {16};
    policy.spec = agent::make_actor_spec(arch, cfg.limits);
    policy.params = nn::ParamStore::initialize(policy.spec, 8, 1.0);
    policy.limits = cfg.limits;
  }
  sim::EnvConfig cfg;
  agent::Policy policy;
};

TEST_F(CollectFixture, RowsCoverEveryStep) {
  auto c = collect(policy, cfg, 3, 99);
  std::size_t steps = 0;
  for (const auto& t : c.trajectories) steps += t.steps.size();
  EXPECT_EQ(c.dataset.rows.size(), steps);
  EXPECT_EQ(c.dataset.features.size(), 9u);
  for (const auto& r : c.dataset.rows) {
    for (double v : r.normalized) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0;
      for (double p : r.phi[k]) s += p;
      EXPECT_NEAR(s, r.f_x[k] - r.f_ref[k], 1e-5 * std::max(1.0, std::abs(r.f_x[k] - r.f_ref[k])));
    }
  }
  EXPECT_EQ(c.trajectories[1].episode_seed, mix_seed(99, 1));
  EXPECT_THROW(collect(policy, cfg, 0, 1), ConfigError);
}

TEST_F(CollectFixture, ExportDeterministicAndComplete) {
  auto run = [&](const fs::path& dir) {
    auto c = collect(policy, cfg, 2, 5);
    ExportInput in{&c.dataset, &c.trajectories, c.reference_action, {{"seed", 5}}};
    return export_report(in, dir);
  };
  auto d1 = scratch("e1"), d2 = scratch("e2");
  auto f1 = run(d1), f2 = run(d2);
  ASSERT_EQ(f1, f2);
  // dataset, 3 rankings, 3 x 9 dependence, summary, 2 traces, manifest
  EXPECT_EQ(f1.size(), 1u + 3u + 27u + 1u + 2u + 1u);
  for (const auto& f : f1) EXPECT_EQ(read_file(d1 / f), read_file(d2 / f)) << f;
  auto m = nlohmann::json::parse(read_file(d1 / "manifest.json"));
  EXPECT_EQ(m["seed"], 5);
  EXPECT_EQ(m["dataset_schema"], kDatasetSchema);
  EXPECT_EQ(m["trajectories"], 2);
  EXPECT_EQ(m["files"].size(), f1.size() - 1);
  auto ds = parse_dataset_csv(read_file(d1 / "dataset.csv"));
  EXPECT_EQ(m["rows"], ds.rows.size());
  auto summary = read_file(d1 / "dependence_summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 28);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
