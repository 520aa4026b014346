#pragma once

#include <numbers>
#include <vector>

#include "shapnav/nncore/layer_spec.hpp"

namespace shapnav::nn {

struct ConvStage {
  int channels;
  int kernel;
  int stride;
  bool operator==(const ConvStage&) const = default;
};

struct ArchitectureConfig {
  ImageShape image{1, 48, 64};
  std::vector<ConvStage> conv{{8, 5, 2}, {16, 3, 2}, {8, 3, 2}};
  std::vector<int> head{64, 64};
  bool operator==(const ArchitectureConfig&) const = default;
};

inline std::vector<LayerSpec> image_branch(const ArchitectureConfig& a) {
  std::vector<LayerSpec> b;
  for (const auto& c : a.conv) {
    b.push_back(LayerSpec::conv2d(c.channels, c.kernel, c.stride));
    b.push_back(LayerSpec::relu());
  }
  b.push_back(LayerSpec::gap());
  return b;
}

// Policy network: CNN + GAP features fused with the state vector; outputs
// bounded by tanh_scale to [offset - scale, offset + scale] per unit.
inline NetworkSpec actor_spec(const ArchitectureConfig& a, int state_width,
                              const std::vector<double>& scale, const std::vector<double>& offset) {
  NetworkSpec s;
  s.image = a.image;
  s.image_branch = image_branch(a);
  s.state_width = state_width;
  for (int u : a.head) {
    s.head.push_back(LayerSpec::dense(u));
    s.head.push_back(LayerSpec::relu());
  }
  s.head.push_back(LayerSpec::dense(static_cast<int>(scale.size())));
  s.head.push_back(LayerSpec::tanh_scale(scale, offset));
  s.output_width = static_cast<int>(scale.size());
  return s;
}

// Q network: same perception branch; the fused vector also carries the action.
inline NetworkSpec critic_spec(const ArchitectureConfig& a, int state_width, int action_width) {
  NetworkSpec s;
  s.image = a.image;
  s.image_branch = image_branch(a);
  s.state_width = state_width + action_width;
  for (int u : a.head) {
    s.head.push_back(LayerSpec::dense(u));
    s.head.push_back(LayerSpec::relu());
  }
  s.head.push_back(LayerSpec::dense(1));
  s.output_width = 1;
  return s;
}

}  // namespace shapnav::nn
