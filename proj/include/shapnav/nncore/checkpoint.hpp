#pragma once

// Checkpoint layout: a text manifest at `path` and a flat little-endian f32
// payload at `path + ".bin"`.
//
//   shapnav-checkpoint 1
//   payload <payload file name>
//   tensors <count>
//   <name> <shape, e.g. 8x1x5x5> <offset> <count>
//   ...
//   total <float count>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/kvconfig.hpp"
#include "shapnav/nncore/adam.hpp"
#include "shapnav/nncore/param_store.hpp"
#include "shapnav/nncore/tensor.hpp"

namespace shapnav::nn {

inline constexpr int kCheckpointSchemaVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline std::filesystem::path payload_path(const std::filesystem::path& manifest) {
  return std::filesystem::path(manifest.string() + ".bin");
}

inline void save_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path) {
  std::ostringstream man;
  man << "shapnav-checkpoint " << kCheckpointSchemaVersion << "\n";
  man << "payload " << payload_path(path).filename().string() << "\n";
  man << "tensors " << tensors.size() << "\n";
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos)
      throw ConfigError("invalid tensor name '" + t.name + "'");
    man << t.name << " " << shape_str(t.tensor.shape()) << " " << offset << " " << t.tensor.size() << "\n";
    offset += t.tensor.size();
  }
  man << "total " << offset << "\n";

  std::vector<std::uint32_t> words;
  words.reserve(offset);
  for (const auto& t : tensors)
    for (float v : t.tensor.values()) {
      auto w = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big)
        w = (w >> 24) | ((w >> 8) & 0xFF00u) | ((w << 8) & 0xFF0000u) | (w << 24);
      words.push_back(w);
    }
  {
    std::ofstream f(payload_path(path), std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint payload: " + payload_path(path).string());
    f.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!f) throw IoError("write failed: " + payload_path(path).string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint manifest: " + path.string());
  f << man.str();
  if (!f) throw IoError("write failed: " + path.string());
}

inline Shape parse_shape(const std::string& s) {
  Shape shape;
  if (s == "scalar") return shape;
  for (const auto& part : split(s, 'x')) shape.push_back(static_cast<int>(parse_int(part, "tensor shape")));
  return shape;
}

// Reads every tensor; nothing is returned unless the whole file set is valid.
inline std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  auto corrupt = [&](const std::string& why) {
    return CorruptCheckpoint("corrupt checkpoint " + path.string() + ": " + why);
  };
  std::string magic;
  std::string version;
  if (!(f >> magic >> version) || magic != "shapnav-checkpoint") throw corrupt("bad magic line");
  long long v = 0;
  try {
    v = parse_int(version, "checkpoint version");
  } catch (const ConfigError&) {
    throw corrupt("bad schema version token");
  }
  if (v != kCheckpointSchemaVersion)
    throw VersionError("checkpoint " + path.string() + " has schema version " + version +
                       ", this build reads version " + std::to_string(kCheckpointSchemaVersion));
  std::string key, payload_name;
  std::size_t count = 0;
  if (!(f >> key >> payload_name) || key != "payload") throw corrupt("missing payload line");
  if (!(f >> key >> count) || key != "tensors") throw corrupt("missing tensor count");
  struct Row {
    std::string name;
    Shape shape;
    std::size_t offset, count;
  };
  std::vector<Row> rows;
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Row r;
    std::string shape;
    if (!(f >> r.name >> shape >> r.offset >> r.count)) throw corrupt("truncated tensor table");
    try {
      r.shape = parse_shape(shape);
    } catch (const ConfigError&) {
      throw corrupt("bad shape for " + r.name);
    }
    if (shape_size(r.shape) != r.count || r.offset != expected_offset) throw corrupt("inconsistent entry " + r.name);
    expected_offset += r.count;
    rows.push_back(std::move(r));
  }
  std::size_t total = 0;
  if (!(f >> key >> total) || key != "total" || total != expected_offset) throw corrupt("bad total");

  auto ppath = path.parent_path() / payload_name;
  std::ifstream pf(ppath, std::ios::binary | std::ios::ate);
  if (!pf) throw IoError("cannot open checkpoint payload: " + ppath.string());
  auto bytes = static_cast<std::size_t>(pf.tellg());
  if (bytes != total * 4)
    throw corrupt("payload holds " + std::to_string(bytes) + " bytes, manifest lists " +
                  std::to_string(total * 4));
  pf.seekg(0);
  std::vector<std::uint32_t> words(total);
  pf.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!pf) throw corrupt("short payload read");

  std::vector<NamedTensor> out;
  for (const auto& r : rows) {
    std::vector<float> data(r.count);
    for (std::size_t k = 0; k < r.count; ++k) {
      auto w = words[r.offset + k];
      if constexpr (std::endian::native == std::endian::big)
        w = (w >> 24) | ((w >> 8) & 0xFF00u) | ((w << 8) & 0xFF0000u) | (w << 24);
      data[k] = std::bit_cast<float>(w);
    }
    out.push_back({r.name, Tensor(r.shape, std::move(data))});
  }
  return out;
}

inline std::vector<NamedTensor> named_tensors(const std::vector<LayerParams<float>>& entries,
                                              const std::string& prefix = {}) {
  std::vector<NamedTensor> out;
  for (const auto& p : entries) {
    out.push_back({prefix + "layer" + std::to_string(p.layer) + ".weight", p.weight});
    out.push_back({prefix + "layer" + std::to_string(p.layer) + ".bias", p.bias});
  }
  return out;
}

// Fills `entries` (already shaped) from `tensors` by name; throws on mismatch.
inline void assign_named(std::vector<LayerParams<float>>& entries, const std::vector<NamedTensor>& tensors,
                         const std::string& prefix, const std::string& origin) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& t : tensors)
      if (t.name == name) return t.tensor;
    throw CorruptCheckpoint("checkpoint " + origin + " is missing tensor " + name);
  };
  for (auto& p : entries) {
    const std::string base = prefix + "layer" + std::to_string(p.layer);
    const Tensor& w = find(base + ".weight");
    const Tensor& b = find(base + ".bias");
    if (w.shape() != p.weight.shape() || b.shape() != p.bias.shape())
      throw CorruptCheckpoint("checkpoint " + origin + ": shape mismatch for " + base);
    p.weight = w;
    p.bias = b;
  }
}

inline void save_params(const ParamStore& store, const std::filesystem::path& path) {
  save_tensors(named_tensors(store.values()), path);
}

// Loads a store shaped for `spec`.
inline ParamStore load_params(const NetworkSpec& spec, const std::filesystem::path& path) {
  auto tensors = load_tensors(path);
  ParamStore store = ParamStore::zeros(spec);
  if (tensors.size() != store.values().size() * 2)
    throw CorruptCheckpoint("checkpoint " + path.string() + " holds " + std::to_string(tensors.size()) +
                            " tensors, network needs " + std::to_string(store.values().size() * 2));
  store.mutate([&](std::vector<LayerParams<float>>& vals) { assign_named(vals, tensors, "", path.string()); });
  return store;
}

inline void save_moments(const AdamMoments& m, const std::filesystem::path& path) {
  auto t = named_tensors(m.m, "m.");
  auto v = named_tensors(m.v, "v.");
  t.insert(t.end(), v.begin(), v.end());
  t.push_back({"step", Tensor({1}, {static_cast<float>(m.step)})});
  save_tensors(t, path);
}

inline AdamMoments load_moments(const ParamStore& like, const std::filesystem::path& path) {
  auto tensors = load_tensors(path);
  AdamMoments m = AdamMoments::like(like);
  assign_named(m.m, tensors, "m.", path.string());
  assign_named(m.v, tensors, "v.", path.string());
  for (const auto& t : tensors)
    if (t.name == "step") m.step = static_cast<long long>(t.tensor[0]);
  return m;
}

}  // namespace shapnav::nn
