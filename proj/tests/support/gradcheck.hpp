#pragma once

// Central finite-difference check of nncore backward() in double precision.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "shapnav/nncore/network.hpp"

namespace gradcheck {

using namespace shapnav;

struct Result {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;
};

inline double rel_error(double a, double b) {
  const double den = std::abs(a) + std::abs(b);
  if (den < 1e-9) return 0.0;
  return std::abs(a - b) / den;
}

// A random small network that contains `kind`.
inline nn::NetworkSpec random_spec(nn::LayerKind kind, std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  nn::NetworkSpec s;
  s.image = {pick(1, 2), pick(3, 7), pick(3, 7)};
  const int n_conv = pick(1, 2);
  for (int i = 0; i < n_conv; ++i) {
    const int k = std::array<int, 3>{1, 3, 5}[static_cast<std::size_t>(pick(0, 2))];
    s.image_branch.push_back(nn::LayerSpec::conv2d(pick(1, 3), k, pick(1, 2)));
    if (kind == nn::LayerKind::relu || pick(0, 1)) s.image_branch.push_back(nn::LayerSpec::relu());
  }
  s.image_branch.push_back(nn::LayerSpec::gap());
  s.state_width = pick(0, 3);
  const int n_dense = pick(1, 2);
  int width = 0;
  for (int i = 0; i < n_dense; ++i) {
    width = pick(1, 4);
    s.head.push_back(nn::LayerSpec::dense(width));
    if (i + 1 < n_dense && (kind == nn::LayerKind::relu || pick(0, 1))) s.head.push_back(nn::LayerSpec::relu());
  }
  if (kind == nn::LayerKind::tanh_scale || pick(0, 1)) {
    std::vector<double> sc, off;
    for (int j = 0; j < width; ++j) {
      sc.push_back(std::uniform_real_distribution<double>(0.5, 2.0)(rng));
      off.push_back(std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
    }
    s.head.push_back(nn::LayerSpec::tanh_scale(sc, off));
  }
  s.output_width = width;
  return s;
}

// True when every ReLU input is at least `margin` away from the kink.
inline bool away_from_kinks(const nn::BasicForwardTrace<double>& tr, double margin) {
  for (int i = 0; i < tr.layer_count(); ++i) {
    if (tr.layers[static_cast<std::size_t>(i)].spec.kind != nn::LayerKind::relu) continue;
    for (double v : tr.input_of(i).values())
      if (std::abs(v) < margin) return false;
  }
  return true;
}

// Checks parameter, image and state gradients of L = sum(c * outputs).
inline Result check(nn::LayerKind kind, std::uint64_t seed, double h = 1e-3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int attempt = 0;; ++attempt) {
    auto spec = random_spec(kind, rng);
    auto params = nn::BasicParamStore<double>::initialize(spec, rng(), 1.0);
    const int n = 2;
    nn::BasicTensor<double> image({n, spec.image.channels, spec.image.height, spec.image.width});
    for (auto& v : image.values()) v = g(rng);
    nn::BasicTensor<double> state({n, spec.state_width});
    for (auto& v : state.values()) v = g(rng);
    auto fwd = nn::forward(spec, params, image, state);
    if (!away_from_kinks(fwd.trace, 20 * h) && attempt < 200) continue;
    nn::BasicTensor<double> c(fwd.outputs.shape());
    for (auto& v : c.values()) v = g(rng);
    auto loss = [&](const nn::BasicParamStore<double>& p, const nn::BasicTensor<double>& im,
                    const nn::BasicTensor<double>& st) {
      auto o = nn::forward(spec, p, im, st).outputs;
      double s = 0;
      for (std::size_t i = 0; i < o.size(); ++i) s += c[i] * o[i];
      return s;
    };
    params.zero_grad();
    auto in_grads = nn::backward(fwd.trace, params, c);

    Result r;
    auto record = [&](double fd, double an, const std::string& what) {
      double e = rel_error(fd, an);
      ++r.checked;
      if (e > r.max_rel_error) {
        r.max_rel_error = e;
        r.worst = what + " fd=" + std::to_string(fd) + " analytic=" + std::to_string(an);
      }
    };
    const auto grads = params.grads();
    for (std::size_t k = 0; k < params.values().size(); ++k) {
      for (int which = 0; which < 2; ++which) {
        const std::size_t len = which ? params.values()[k].bias.size() : params.values()[k].weight.size();
        for (std::size_t i = 0; i < len; ++i) {
          auto shifted = [&](double d) {
            auto p = params;
            p.mutate([&](std::vector<nn::LayerParams<double>>& v) { (which ? v[k].bias : v[k].weight)[i] += d; });
            return loss(p, image, state);
          };
          double fd = (shifted(h) - shifted(-h)) / (2 * h);
          double an = which ? grads[k].bias[i] : grads[k].weight[i];
          record(fd, an, "layer" + std::to_string(params.values()[k].layer) + (which ? ".bias" : ".weight"));
        }
      }
    }
    for (std::size_t i = 0; i < image.size(); ++i) {
      auto a = image, b = image;
      a[i] += h;
      b[i] -= h;
      record((loss(params, a, state) - loss(params, b, state)) / (2 * h), in_grads.image[i], "image");
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
      auto a = state, b = state;
      a[i] += h;
      b[i] -= h;
      record((loss(params, image, a) - loss(params, image, b)) / (2 * h), in_grads.state[i], "state");
    }
    return r;
  }
}

inline const std::vector<nn::LayerKind>& all_kinds() {
  static const std::vector<nn::LayerKind> k{nn::LayerKind::conv2d, nn::LayerKind::relu,  nn::LayerKind::gap,
                                            nn::LayerKind::dense,  nn::LayerKind::concat, nn::LayerKind::tanh_scale};
  return k;
}

}  // namespace gradcheck
