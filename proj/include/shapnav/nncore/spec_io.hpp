#pragma once

// NetworkSpec <-> sectioned key/value text.
//
//   [network]
//   schema = 1
//   image = 1x48x64          # channels x height x width
//   state_width = 6
//   output_width = 3
//   branch.0 = conv2d out=8 kernel=5 stride=2
//   branch.1 = relu
//   ...
//   head.0 = dense units=64
//   head.5 = tanh_scale scale=2.5,2,0.785398 offset=2.5,0,0
//
// The concat between branch and head is implicit.

#include <filesystem>
#include <sstream>
#include <string>

#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/nncore/layer_spec.hpp"

namespace shapnav::nn {

inline std::string layer_to_text(const LayerSpec& l) {
  std::ostringstream s;
  s << kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::conv2d:
      s << " out=" << l.out_channels << " kernel=" << l.kernel << " stride=" << l.stride;
      break;
    case LayerKind::dense:
      s << " units=" << l.units;
      break;
    case LayerKind::tanh_scale: {
      auto list = [](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_num(v[i]);
        return out;
      };
      s << " scale=" << list(l.scale) << " offset=" << list(l.offset);
      break;
    }
    default:
      break;
  }
  return s.str();
}

inline LayerSpec layer_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  LayerSpec l;
  l.kind = parse_kind(kind);
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad layer attribute '" + tok + "' in '" + text + "'");
    std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (l.kind == LayerKind::conv2d && k == "out") l.out_channels = static_cast<int>(parse_int(v, k));
    else if (l.kind == LayerKind::conv2d && k == "kernel") l.kernel = static_cast<int>(parse_int(v, k));
    else if (l.kind == LayerKind::conv2d && k == "stride") l.stride = static_cast<int>(parse_int(v, k));
    else if (l.kind == LayerKind::dense && k == "units") l.units = static_cast<int>(parse_int(v, k));
    else if (l.kind == LayerKind::tanh_scale && (k == "scale" || k == "offset")) {
      auto& dst = k == "scale" ? l.scale : l.offset;
      for (const auto& part : split(v, ',')) dst.push_back(parse_double(part, k));
    } else {
      throw ConfigError("unknown attribute '" + k + "' for layer kind " + kind);
    }
  }
  return l;
}

inline KvConfig spec_to_config(const NetworkSpec& spec) {
  KvConfig c;
  c.set("network.schema", "1");
  c.set("network.image", std::to_string(spec.image.channels) + "x" + std::to_string(spec.image.height) + "x" +
                             std::to_string(spec.image.width));
  c.set("network.state_width", std::to_string(spec.state_width));
  c.set("network.output_width", std::to_string(spec.output_width));
  for (std::size_t i = 0; i < spec.image_branch.size(); ++i)
    c.set("network.branch." + std::to_string(i), layer_to_text(spec.image_branch[i]));
  for (std::size_t i = 0; i < spec.head.size(); ++i)
    c.set("network.head." + std::to_string(i), layer_to_text(spec.head[i]));
  return c;
}

inline NetworkSpec spec_from_config(const KvConfig& c) {
  if (c.get("network.schema") != "1") throw ConfigError("unsupported network spec schema " + c.get("network.schema"));
  for (const auto& [k, v] : c.entries()) {
    bool known = k == "network.schema" || k == "network.image" || k == "network.state_width" ||
                 k == "network.output_width" || k.rfind("network.branch.", 0) == 0 || k.rfind("network.head.", 0) == 0;
    if (!known) throw ConfigError("unknown network spec key: " + k);
  }
  NetworkSpec s;
  auto dims = split(c.get("network.image"), 'x');
  if (dims.size() != 3) throw ConfigError("network.image must be CxHxW");
  s.image = {static_cast<int>(parse_int(dims[0], "image")), static_cast<int>(parse_int(dims[1], "image")),
             static_cast<int>(parse_int(dims[2], "image"))};
  s.state_width = static_cast<int>(parse_int(c.get("network.state_width"), "state_width"));
  s.output_width = static_cast<int>(parse_int(c.get("network.output_width"), "output_width"));
  for (int i = 0;; ++i) {
    const std::string* v = c.find("network.branch." + std::to_string(i));
    if (!v) break;
    s.image_branch.push_back(layer_from_text(*v));
  }
  for (int i = 0;; ++i) {
    const std::string* v = c.find("network.head." + std::to_string(i));
    if (!v) break;
    s.head.push_back(layer_from_text(*v));
  }
  resolve(s);
  return s;
}

inline void save_spec(const NetworkSpec& spec, const std::filesystem::path& path) {
  spec_to_config(spec).save(path, "shapnav network spec");
}

inline NetworkSpec load_spec(const std::filesystem::path& path) { return spec_from_config(KvConfig::load(path)); }

}  // namespace shapnav::nn
