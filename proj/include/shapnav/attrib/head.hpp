#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/instrument.hpp"
#include "shapnav/nncore/layer_spec.hpp"
#include "shapnav/nncore/param_store.hpp"

namespace shapnav::attrib {

using Vec = Eigen::VectorXd;
using MatD = Eigen::MatrixXd;

struct HeadLayer {
  nn::LayerKind kind = nn::LayerKind::relu;
  MatD weight;  // dense: (out, in)
  Vec bias;     // dense: (out)
  Vec scale;    // tanh_scale
  Vec offset;   // tanh_scale
};

// The fusion head (everything after the concat) evaluated in double
// precision on an explicit input vector.
class HeadFragment {
 public:
  HeadFragment() = default;
  HeadFragment(int input_width, std::vector<HeadLayer> layers) : input_width_(input_width), layers_(std::move(layers)) {
    int w = input_width_;
    for (const auto& l : layers_) {
      switch (l.kind) {
        case nn::LayerKind::dense:
          if (l.weight.cols() != w || l.bias.size() != l.weight.rows())
            throw ConfigError("head dense layer does not match its input width");
          w = static_cast<int>(l.weight.rows());
          break;
        case nn::LayerKind::relu:
          break;
        case nn::LayerKind::tanh_scale:
          if (l.scale.size() != w || l.offset.size() != w)
            throw ConfigError("head tanh_scale needs one (scale, offset) pair per unit");
          break;
        default:
          throw ConfigError(std::string("unsupported layer kind in attribution head: ") + nn::kind_name(l.kind));
      }
    }
    output_width_ = w;
  }

  template <typename T>
  static HeadFragment from_network(const nn::NetworkSpec& spec, const nn::BasicParamStore<T>& params) {
    auto resolved = nn::resolve(spec);
    const int first = spec.concat_index() + 1;
    std::vector<HeadLayer> layers;
    for (int i = first; i < static_cast<int>(resolved.size()); ++i) {
      const auto& r = resolved[static_cast<std::size_t>(i)];
      HeadLayer h;
      h.kind = r.spec.kind;
      if (r.spec.kind == nn::LayerKind::dense) {
        const auto& p = params.at_layer(i);
        h.weight = MatD(r.out_width, r.in_width);
        for (int o = 0; o < r.out_width; ++o)
          for (int k = 0; k < r.in_width; ++k)
            h.weight(o, k) = static_cast<double>(p.weight[static_cast<std::size_t>(o) * r.in_width + k]);
        h.bias = Vec(r.out_width);
        for (int o = 0; o < r.out_width; ++o) h.bias(o) = static_cast<double>(p.bias[static_cast<std::size_t>(o)]);
      } else if (r.spec.kind == nn::LayerKind::tanh_scale) {
        h.scale = Eigen::Map<const Vec>(r.spec.scale.data(), static_cast<Eigen::Index>(r.spec.scale.size()));
        h.offset = Eigen::Map<const Vec>(r.spec.offset.data(), static_cast<Eigen::Index>(r.spec.offset.size()));
      }
      layers.push_back(std::move(h));
    }
    return HeadFragment(resolved[static_cast<std::size_t>(spec.concat_index())].out_width, std::move(layers));
  }

  int input_width() const { return input_width_; }
  int output_width() const { return output_width_; }
  const std::vector<HeadLayer>& layers() const { return layers_; }

  static Vec apply(const HeadLayer& l, const Vec& x) {
    switch (l.kind) {
      case nn::LayerKind::dense: return l.weight * x + l.bias;
      case nn::LayerKind::relu: return x.cwiseMax(0.0);
      case nn::LayerKind::tanh_scale: return (l.scale.array() * x.array().tanh() + l.offset.array()).matrix();
      default: throw ConfigError("unsupported layer kind in attribution head");
    }
  }

  // Activations: acts[0] = input, acts[i + 1] = output of layer i.
  std::vector<Vec> trace(const Vec& x) const {
    if (x.size() != input_width_) throw ConfigError("head input has the wrong width");
    instrument::counters().head_evaluation.fetch_add(1, std::memory_order_relaxed);
    std::vector<Vec> acts;
    acts.reserve(layers_.size() + 1);
    acts.push_back(x);
    for (const auto& l : layers_) acts.push_back(apply(l, acts.back()));
    return acts;
  }

  Vec eval(const Vec& x) const { return trace(x).back(); }

 private:
  int input_width_ = 0;
  int output_width_ = 0;
  std::vector<HeadLayer> layers_;
};

}  // namespace shapnav::attrib
