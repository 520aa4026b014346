#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "shapnav/agent/evaluate.hpp"
#include "shapnav/agent/policy.hpp"
#include "shapnav/attrib/step.hpp"
#include "shapnav/error.hpp"
#include "shapnav/rng.hpp"

namespace shapnav::report {

struct DatasetRow {
  int trajectory = 0;
  int step = 0;
  std::vector<double> raw;         // CNN features as computed, state in physical units
  std::vector<double> normalized;  // all in [0, 1]
  std::array<std::vector<double>, 3> phi;
  std::array<double, 3> f_x{};
  std::array<double, 3> f_ref{};
};

struct AttributionDataset {
  std::vector<std::string> features;
  int n_cnn = 0;
  int trajectory_count = 0;
  std::vector<DatasetRow> rows;

  std::size_t feature_index(const std::string& name) const {
    auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) throw ConfigError("unknown feature: " + name);
    return static_cast<std::size_t>(it - features.begin());
  }
};

// CNN columns are min-max scaled over the dataset; a constant column maps to 0.
// State columns arrive already normalized.
inline void normalize_cnn_columns(AttributionDataset& ds) {
  for (int c = 0; c < ds.n_cnn; ++c) {
    auto k = static_cast<std::size_t>(c);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : ds.rows) {
      lo = std::min(lo, r.raw[k]);
      hi = std::max(hi, r.raw[k]);
    }
    for (auto& r : ds.rows) r.normalized[k] = hi > lo ? (r.raw[k] - lo) / (hi - lo) : 0.0;
  }
}

struct Collection {
  AttributionDataset dataset;
  std::vector<agent::Trajectory> trajectories;
  sim::ActionCommand reference_action;
};

// Noise-free episodes with one attribute_step per timestep; the policy
// action is taken from the same forward pass.
inline Collection collect(const agent::Policy& policy, const sim::EnvConfig& env_cfg, int n_trajectories,
                          std::uint64_t seed) {
  if (n_trajectories < 1) throw ConfigError("report needs at least 1 trajectory");
  auto head = attrib::HeadFragment::from_network(policy.spec, policy.params);
  auto ref = attrib::make_reference(policy.spec, policy.params, head, env_cfg);
  Collection out;
  auto& ds = out.dataset;
  ds.n_cnn = nn::cnn_feature_count(policy.spec);
  ds.features = attrib::feature_names(ds.n_cnn);
  ds.trajectory_count = n_trajectories;
  out.reference_action = policy.limits.clamp({ref.outputs[0], ref.outputs[1], ref.outputs[2]});
  sim::NavEnv env(env_cfg);
  for (int t = 0; t < n_trajectories; ++t) {
    int step = 0;
    auto act = [&](const sim::Observation& obs) {
      auto s = attrib::attribute_step(policy.spec, policy.params, head, obs, ref);
      DatasetRow row;
      row.trajectory = t;
      row.step = ++step;
      row.raw.assign(s.features.begin(), s.features.begin() + ds.n_cnn);
      auto raw = obs.raw.as_array();
      row.raw.insert(row.raw.end(), raw.begin(), raw.end());
      row.normalized.assign(static_cast<std::size_t>(ds.n_cnn), 0.0);
      row.normalized.insert(row.normalized.end(), obs.state.begin(), obs.state.end());
      for (std::size_t k = 0; k < 3; ++k) {
        row.phi[k] = s.results[k].phi;
        row.f_x[k] = s.results[k].f_x;
        row.f_ref[k] = s.results[k].f_ref;
      }
      ds.rows.push_back(std::move(row));
      return policy.limits.clamp({s.outputs[0], s.outputs[1], s.outputs[2]});
    };
    out.trajectories.push_back(agent::run_episode(env, mix_seed(seed, static_cast<std::uint64_t>(t)), act));
  }
  normalize_cnn_columns(ds);
  return out;
}

struct RankedFeature {
  std::string feature;
  double mean_abs_phi = 0;
};

using ImportanceRanking = std::array<std::vector<RankedFeature>, 3>;

inline ImportanceRanking importance_ranking(const AttributionDataset& ds) {
  if (ds.rows.empty()) throw ConfigError("importance ranking of an empty dataset");
  ImportanceRanking out;
  const std::size_t nf = ds.features.size();
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> sum(nf, 0.0);
    for (const auto& r : ds.rows)
      for (std::size_t i = 0; i < nf; ++i) sum[i] += std::abs(r.phi[k][i]);
    for (std::size_t i = 0; i < nf; ++i) out[k].push_back({ds.features[i], sum[i] / static_cast<double>(ds.rows.size())});
    std::stable_sort(out[k].begin(), out[k].end(), [](const RankedFeature& a, const RankedFeature& b) {
      if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
      return a.feature < b.feature;
    });
  }
  return out;
}

// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

// Spearman rank correlation; nullopt when either column is constant.
inline std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("spearman: column lengths differ");
  if (a.size() < 2) return std::nullopt;
  auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

struct Dependence {
  std::string feature;
  int output_index = 0;
  std::vector<double> value;  // normalized feature value
  std::vector<double> phi;
  std::optional<double> spearman;
};

inline Dependence dependence_data(const AttributionDataset& ds, const std::string& feature, int output_index) {
  if (output_index < 0 || output_index > 2) throw ConfigError("output index out of range");
  const std::size_t f = ds.feature_index(feature);
  Dependence d;
  d.feature = feature;
  d.output_index = output_index;
  for (const auto& r : ds.rows) {
    d.value.push_back(r.normalized[f]);
    d.phi.push_back(r.phi[static_cast<std::size_t>(output_index)][f]);
  }
  d.spearman = spearman(d.value, d.phi);
  return d;
}

}  // namespace shapnav::report
