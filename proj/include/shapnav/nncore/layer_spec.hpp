#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "shapnav/error.hpp"

namespace shapnav::nn {

enum class LayerKind { conv2d, relu, gap, dense, concat, tanh_scale };

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::gap: return "gap";
    case LayerKind::dense: return "dense";
    case LayerKind::concat: return "concat";
    case LayerKind::tanh_scale: return "tanh_scale";
  }
  return "?";
}

inline LayerKind parse_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::relu, LayerKind::gap, LayerKind::dense,
                      LayerKind::concat, LayerKind::tanh_scale})
    if (s == kind_name(k)) return k;
  throw ConfigError("unknown layer kind: " + s);
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // conv2d. Padding is kernel/2 on every side.
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  // dense
  int units = 0;
  // tanh_scale: y = scale * tanh(x) + offset, one pair per unit
  std::vector<double> scale;
  std::vector<double> offset;

  static LayerSpec conv2d(int out_channels, int kernel, int stride) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec gap() {
    LayerSpec s;
    s.kind = LayerKind::gap;
    return s;
  }
  static LayerSpec dense(int units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
  }
  static LayerSpec concat() {
    LayerSpec s;
    s.kind = LayerKind::concat;
    return s;
  }
  static LayerSpec tanh_scale(std::vector<double> scale, std::vector<double> offset) {
    LayerSpec s;
    s.kind = LayerKind::tanh_scale;
    s.scale = std::move(scale);
    s.offset = std::move(offset);
    return s;
  }

  bool trainable() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  bool operator==(const LayerSpec&) const = default;
};

struct ImageShape {
  int channels = 1;
  int height = 48;
  int width = 64;
  bool operator==(const ImageShape&) const = default;
};

// Image branch -> implicit concat with the state vector -> head.
struct NetworkSpec {
  ImageShape image;
  std::vector<LayerSpec> image_branch;
  int state_width = 6;
  std::vector<LayerSpec> head;
  int output_width = 3;

  // Flattened layer list: branch layers, one concat layer, head layers.
  std::vector<LayerSpec> layers() const {
    std::vector<LayerSpec> all = image_branch;
    all.push_back(LayerSpec::concat());
    all.insert(all.end(), head.begin(), head.end());
    return all;
  }
  int concat_index() const { return static_cast<int>(image_branch.size()); }
  int layer_count() const { return static_cast<int>(image_branch.size() + 1 + head.size()); }

  bool operator==(const NetworkSpec&) const = default;
};

// Shape of one layer's input and output. Image activations are (c, h, w);
// vector activations use width only.
struct ResolvedLayer {
  LayerSpec spec;
  bool image_in = false;
  int in_c = 0, in_h = 0, in_w = 0;  // image input
  int in_width = 0;                  // vector input
  bool image_out = false;
  int out_c = 0, out_h = 0, out_w = 0;
  int out_width = 0;
  int pad = 0;

  int in_features() const { return image_in ? in_c * in_h * in_w : in_width; }
  int out_features() const { return image_out ? out_c * out_h * out_w : out_width; }
};

inline int conv_out_dim(int in, int kernel, int stride) {
  int pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

// Validates a spec and computes every layer's shapes.
inline std::vector<ResolvedLayer> resolve(const NetworkSpec& spec) {
  auto fail = [](int i, const std::string& msg) {
    throw ConfigError("network layer " + std::to_string(i) + ": " + msg);
  };
  if (spec.image.channels < 1 || spec.image.height < 1 || spec.image.width < 1)
    throw ConfigError("network image shape must be positive");
  if (spec.state_width < 0) throw ConfigError("network state_width must be >= 0");
  if (spec.image_branch.empty() || spec.image_branch.back().kind != LayerKind::gap)
    throw ConfigError("network image branch must end in gap");

  std::vector<ResolvedLayer> out;
  bool image = true;
  int c = spec.image.channels, h = spec.image.height, w = spec.image.width, width = 0;
  int idx = 0;
  for (const LayerSpec& ls : spec.layers()) {
    ResolvedLayer r;
    r.spec = ls;
    r.image_in = image;
    r.in_c = c;
    r.in_h = h;
    r.in_w = w;
    r.in_width = width;
    bool in_branch = idx < spec.concat_index();
    switch (ls.kind) {
      case LayerKind::conv2d:
        if (!in_branch || !image) fail(idx, "conv2d only allowed in the image branch");
        if (ls.stride < 1) fail(idx, "conv2d stride must be >= 1");
        if (ls.kernel < 1 || ls.kernel % 2 == 0) fail(idx, "conv2d kernel must be odd and >= 1");
        if (ls.out_channels < 1) fail(idx, "conv2d out_channels must be >= 1");
        r.pad = ls.kernel / 2;
        h = conv_out_dim(h, ls.kernel, ls.stride);
        w = conv_out_dim(w, ls.kernel, ls.stride);
        c = ls.out_channels;
        if (h < 1 || w < 1) fail(idx, "conv2d output is empty");
        break;
      case LayerKind::relu:
        break;
      case LayerKind::gap:
        if (!in_branch || !image) fail(idx, "gap only allowed in the image branch");
        image = false;
        width = c;
        break;
      case LayerKind::concat:
        if (image) fail(idx, "concat requires pooled image features");
        width = width + spec.state_width;
        break;
      case LayerKind::dense:
        if (in_branch || image) fail(idx, "dense only allowed in the head");
        if (ls.units < 1) fail(idx, "dense units must be >= 1");
        width = ls.units;
        break;
      case LayerKind::tanh_scale:
        if (in_branch || image) fail(idx, "tanh_scale only allowed in the head");
        if (static_cast<int>(ls.scale.size()) != width || static_cast<int>(ls.offset.size()) != width)
          fail(idx, "tanh_scale needs exactly one (scale, offset) pair per unit");
        for (std::size_t k = 0; k < ls.scale.size(); ++k)
          if (!std::isfinite(ls.scale[k]) || !std::isfinite(ls.offset[k]) || ls.scale[k] == 0.0)
            fail(idx, "tanh_scale scale must be finite and non-zero");
        break;
    }
    r.image_out = image;
    r.out_c = c;
    r.out_h = h;
    r.out_w = w;
    r.out_width = width;
    out.push_back(std::move(r));
    ++idx;
  }
  if (width != spec.output_width)
    throw ConfigError("network head emits " + std::to_string(width) + " outputs, spec says " +
                      std::to_string(spec.output_width));
  return out;
}

// Number of pooled CNN features (channels of the last conv layer).
inline int cnn_feature_count(const NetworkSpec& spec) {
  auto layers = resolve(spec);
  return layers[static_cast<std::size_t>(spec.concat_index())].in_width;
}

}  // namespace shapnav::nn
