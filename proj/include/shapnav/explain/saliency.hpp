#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/nncore/tensor.hpp"

namespace shapnav::explain {

struct SaliencyMap {
  int output_index = 0;
  int height = 0, width = 0;  // last-conv resolution
  std::vector<double> coarse;
  int up_height = 0, up_width = 0;  // input-image resolution
  std::vector<double> upsampled;
};

// Bilinear resize with half-pixel centers and edge clamping.
inline std::vector<double> bilinear_resize(const std::vector<double>& src, int h, int w, int oh, int ow) {
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    double sy = std::clamp((y + 0.5) * h / oh - 0.5, 0.0, h - 1.0);
    int y0 = static_cast<int>(std::floor(sy));
    int y1 = std::min(y0 + 1, h - 1);
    double fy = sy - y0;
    for (int x = 0; x < ow; ++x) {
      double sx = std::clamp((x + 0.5) * w / ow - 0.5, 0.0, w - 1.0);
      int x0 = static_cast<int>(std::floor(sx));
      int x1 = std::min(x0 + 1, w - 1);
      double fx = sx - x0;
      auto at = [&](int yy, int xx) { return src[static_cast<std::size_t>(yy) * w + xx]; };
      double top = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
      double bot = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
      out[static_cast<std::size_t>(y) * ow + x] = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

// Signed SHAP-weighted sum of activation maps (C, h, w); no rectification.
inline SaliencyMap shap_cam(const nn::Tensor& maps, const std::vector<double>& cnn_phi, int out_height,
                            int out_width, int output_index = 0) {
  if (maps.rank() != 3) throw ConfigError("activation maps must be (channels, height, width)");
  const int c = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  if (static_cast<int>(cnn_phi.size()) != c)
    throw ConfigError("SHAP-CAM channel mismatch: " + std::to_string(c) + " maps, " +
                      std::to_string(cnn_phi.size()) + " weights");
  SaliencyMap s;
  s.output_index = output_index;
  s.height = h;
  s.width = w;
  s.coarse.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int k = 0; k < c; ++k) {
    const double phi = cnn_phi[static_cast<std::size_t>(k)];
    const float* a = maps.data() + static_cast<std::size_t>(k) * h * w;
    for (std::size_t i = 0; i < s.coarse.size(); ++i) s.coarse[i] += phi * static_cast<double>(a[i]);
  }
  s.up_height = out_height;
  s.up_width = out_width;
  s.upsampled = bilinear_resize(s.coarse, h, w, out_height, out_width);
  return s;
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Colour mapping, fixed:
//   t = v / max|v| over the map (t = 0 everywhere for an all-zero map)
//   tint = white -> red for t > 0, white -> blue for t < 0, at |t|
//   alpha = 0.6 |t|; base = grey level 255 * depth
//   pixel = round((1 - alpha) base + alpha tint)
inline constexpr double kMaxAlpha = 0.6;

inline Rgb blend_pixel(double depth01, double t) {
  const double base = 255.0 * std::clamp(depth01, 0.0, 1.0);
  const double a = kMaxAlpha * std::abs(t);
  const double fade = 255.0 * (1.0 - std::abs(t));
  const double tr = t >= 0 ? 255.0 : fade;
  const double tg = fade;
  const double tb = t <= 0 ? 255.0 : fade;
  auto mix = [&](double tint) {
    return static_cast<std::uint8_t>(std::clamp(std::lround((1 - a) * base + a * tint), 0L, 255L));
  };
  return {mix(tr), mix(tg), mix(tb)};
}

inline std::vector<Rgb> colorize(const SaliencyMap& m, const nn::Tensor& base_depth) {
  const std::size_t n = static_cast<std::size_t>(m.up_height) * m.up_width;
  if (base_depth.size() != n) throw ConfigError("base depth image size does not match the saliency map");
  double peak = 0;
  for (double v : m.upsampled) peak = std::max(peak, std::abs(v));
  std::vector<Rgb> px(n);
  for (std::size_t i = 0; i < n; ++i) px[i] = blend_pixel(base_depth[i], peak > 0 ? m.upsampled[i] / peak : 0.0);
  return px;
}

inline std::string ppm_bytes(const std::vector<Rgb>& px, int width, int height) {
  std::string s = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (const auto& p : px) {
    s.push_back(static_cast<char>(p.r));
    s.push_back(static_cast<char>(p.g));
    s.push_back(static_cast<char>(p.b));
  }
  return s;
}

inline void render_saliency(const SaliencyMap& m, const nn::Tensor& base_depth, const std::filesystem::path& path) {
  std::string bytes = ppm_bytes(colorize(m, base_depth), m.up_width, m.up_height);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace shapnav::explain
