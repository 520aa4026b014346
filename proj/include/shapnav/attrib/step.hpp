#pragma once

#include <array>
#include <vector>

#include "shapnav/attrib/attribution.hpp"
#include "shapnav/attrib/head.hpp"
#include "shapnav/nncore/network.hpp"
#include "shapnav/simenv/env.hpp"

namespace shapnav::attrib {

// Fusion vector (GAP features then state) for each batch row of a trace.
inline std::vector<double> fusion_features(const nn::ForwardTrace& tr, const nn::NetworkSpec& spec) {
  const int ci = spec.concat_index();
  const auto& f = tr.output_of(ci);
  std::vector<double> x(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) x[i] = static_cast<double>(f[i]);
  return x;
}

// Activation maps averaged by GAP: (channels, h, w) for batch row 0.
inline nn::Tensor last_conv_maps(const nn::ForwardTrace& tr, const nn::NetworkSpec& spec) {
  const int gap = spec.concat_index() - 1;
  const auto& a = tr.input_of(gap);
  nn::Tensor m = a;
  m.reshape({a.dim(1), a.dim(2), a.dim(3)});
  return m;
}

// Fixed reference input: obstacle-free scene at flight height and the
// canonical state, with its forward pass cached.
struct ReferenceInput {
  nn::Tensor depth;                 // (1, H, W)
  std::array<float, 6> state{};     // normalized
  sim::StateFeatures raw;
  std::vector<double> features;     // fusion vector x'
  std::vector<float> outputs;       // network outputs on the reference
  nn::Tensor maps;                  // last-conv activation maps
  std::vector<Vec> head_trace;      // double-precision head activations on x'
};

inline ReferenceInput make_reference(const nn::NetworkSpec& spec, const nn::ParamStore& params,
                                     const HeadFragment& head, const sim::EnvConfig& env) {
  ReferenceInput r;
  sim::Observation o = sim::reference_observation(env);
  r.depth = o.depth;
  r.state = o.state;
  r.raw = o.raw;
  auto f = nn::forward(spec, params, r.depth, nn::Tensor({spec.state_width}, {r.state.begin(), r.state.end()}));
  r.features = fusion_features(f.trace, spec);
  r.outputs = f.outputs.vector();
  r.maps = last_conv_maps(f.trace, spec);
  r.head_trace = head.trace(to_vec(r.features));
  return r;
}

struct StepAttribution {
  std::array<AttributionResult, 3> results;
  std::vector<double> features;  // fusion vector x
  std::vector<float> outputs;    // network outputs (float forward)
  nn::Tensor maps;               // (channels, h, w)
};

// One forward pass, then one Rescale pass per output.
inline StepAttribution attribute_step(const nn::NetworkSpec& spec, const nn::ParamStore& params,
                                      const HeadFragment& head, const sim::Observation& obs,
                                      const ReferenceInput& ref) {
  if (head.output_width() != 3) throw ConfigError("attribute_step expects a 3-output policy head");
  StepAttribution s;
  auto f = nn::forward(spec, params, obs.depth, nn::Tensor({spec.state_width}, {obs.state.begin(), obs.state.end()}));
  s.features = fusion_features(f.trace, spec);
  s.outputs = f.outputs.vector();
  s.maps = last_conv_maps(f.trace, spec);
  for (int k = 0; k < 3; ++k)
    s.results[static_cast<std::size_t>(k)] = deepshap_attribute(head, s.features, ref.features, k, &ref.head_trace);
  return s;
}

}  // namespace shapnav::attrib
