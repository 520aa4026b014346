#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <string>
#include <vector>

#include "shapnav/attrib/json.hpp"
#include "shapnav/attrib/step.hpp"
#include "shapnav/explain/saliency.hpp"
#include "shapnav/format.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::explain {

inline constexpr std::array<std::array<const char*, 3>, 3> kBandLabels{{
    {"slow down", "maintain speed", "speed up"},
    {"descend", "maintain altitude", "climb"},
    {"turn left", "maintain heading", "turn right"},
}};

// Per-action center band [lower, upper] around the reference action.
struct ActionBands {
  std::array<double, 3> lower{};
  std::array<double, 3> upper{};
};

// Center band = reference +- fraction * full range, clipped to the range.
inline ActionBands make_bands(const sim::ActionCommand& reference, const sim::ActionLimits& lim,
                              std::array<double, 3> fraction = {0.1, 0.1, 0.1}) {
  ActionBands b;
  auto lo = lim.low(), hi = lim.high(), ref = reference.as_array();
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(fraction[i] > 0)) throw ConfigError("band fraction must be > 0");
    const double half = fraction[i] * (hi[i] - lo[i]);
    b.lower[i] = std::max(lo[i], ref[i] - half);
    b.upper[i] = std::min(hi[i], ref[i] + half);
    if (!(b.lower[i] < b.upper[i])) throw ConfigError("degenerate action band");
  }
  return b;
}

// 0 below the band, 1 inside (edges included), 2 above.
inline int band_of(double v, double lower, double upper) {
  if (v < lower) return 0;
  if (v > upper) return 2;
  return 1;
}

struct TextualLabel {
  std::array<std::string, 3> labels;
  std::string sentence;
};

inline TextualLabel textual_label(const sim::ActionCommand& action, const ActionBands& bands) {
  TextualLabel t;
  auto a = action.as_array();
  for (std::size_t i = 0; i < 3; ++i) t.labels[i] = kBandLabels[i][static_cast<std::size_t>(band_of(a[i], bands.lower[i], bands.upper[i]))];
  t.sentence = t.labels[0] + ", " + t.labels[1] + " and " + t.labels[2];
  return t;
}

struct Contributor {
  std::string feature;
  double phi = 0;
};

// Descending |phi|; equal magnitudes ordered by feature name.
inline std::vector<Contributor> rank_contributors(const std::vector<double>& phi, const std::vector<std::string>& names) {
  std::vector<Contributor> c;
  for (std::size_t i = 0; i < phi.size(); ++i) c.push_back({names[i], phi[i]});
  std::sort(c.begin(), c.end(), [](const Contributor& a, const Contributor& b) {
    if (std::abs(a.phi) != std::abs(b.phi)) return std::abs(a.phi) > std::abs(b.phi);
    return a.feature < b.feature;
  });
  return c;
}

inline constexpr double kDominantShare = 0.4;
inline constexpr double kNegligibleTotal = 1e-9;

// "dominant factor: X" when the top |phi| holds >= 40% of sum |phi|,
// otherwise "main factors: X, Y".
inline std::string factor_clause(const std::vector<Contributor>& ranked) {
  double total = 0;
  for (const auto& c : ranked) total += std::abs(c.phi);
  if (ranked.empty() || total < kNegligibleTotal) return "no dominant factor";
  if (std::abs(ranked[0].phi) >= kDominantShare * total) return "dominant factor: " + ranked[0].feature;
  std::string s = "main factors: " + ranked[0].feature;
  if (ranked.size() > 1) s += ", " + ranked[1].feature;
  return s;
}

struct LocalExplanation {
  int step = 0;
  sim::ActionCommand action;
  sim::ActionCommand reference_action;
  TextualLabel text;
  std::array<std::vector<Contributor>, 3> contributors;
  std::array<std::string, 3> clauses;
  std::array<SaliencyMap, 3> saliency;
  attrib::StepAttribution attribution;
};

inline sim::ActionCommand command_from(const std::vector<float>& out, const sim::ActionLimits& lim) {
  return lim.clamp({out.at(0), out.at(1), out.at(2)});
}

inline LocalExplanation explain_step(const nn::NetworkSpec& spec, const nn::ParamStore& params,
                                     const attrib::HeadFragment& head, const sim::Observation& obs,
                                     const attrib::ReferenceInput& ref, const ActionBands& bands,
                                     const sim::ActionLimits& lim, int step = 0) {
  LocalExplanation e;
  e.step = step;
  e.attribution = attrib::attribute_step(spec, params, head, obs, ref);
  e.action = command_from(e.attribution.outputs, lim);
  e.reference_action = command_from(ref.outputs, lim);
  e.text = textual_label(e.action, bands);
  const int n_cnn = static_cast<int>(e.attribution.maps.dim(0));
  const auto names = attrib::feature_names(n_cnn);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& r = e.attribution.results[k];
    e.contributors[k] = rank_contributors(r.phi, names);
    e.clauses[k] = factor_clause(e.contributors[k]);
    std::vector<double> cnn(r.phi.begin(), r.phi.begin() + n_cnn);
    e.saliency[k] = shap_cam(e.attribution.maps, cnn, obs.depth.dim(1), obs.depth.dim(2), static_cast<int>(k));
  }
  return e;
}

inline nlohmann::ordered_json to_json(const LocalExplanation& e) {
  nlohmann::ordered_json j;
  j["step"] = e.step;
  auto a = e.action.as_array(), ra = e.reference_action.as_array();
  j["action"] = std::vector<double>(a.begin(), a.end());
  j["reference_action"] = std::vector<double>(ra.begin(), ra.end());
  j["labels"] = std::vector<std::string>(e.text.labels.begin(), e.text.labels.end());
  j["sentence"] = e.text.sentence;
  const int n_cnn = static_cast<int>(e.attribution.maps.dim(0));
  const auto names = attrib::feature_names(n_cnn);
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < 3; ++k) {
    nlohmann::ordered_json o;
    o["output"] = attrib::kOutputNames[k];
    o["label"] = e.text.labels[k];
    o["clause"] = e.clauses[k];
    nlohmann::ordered_json top = nlohmann::ordered_json::array();
    for (const auto& c : e.contributors[k]) top.push_back({{"feature", c.feature}, {"phi", c.phi}});
    o["contributors"] = top;
    o["attribution"] = attrib::to_json(e.attribution.results[k], names);
    outs.push_back(o);
  }
  j["outputs"] = outs;
  return j;
}

}  // namespace shapnav::explain
