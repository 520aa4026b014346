#pragma once

#include <cmath>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/nncore/param_store.hpp"

namespace shapnav::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct BasicAdamMoments {
  std::vector<LayerParams<T>> m;
  std::vector<LayerParams<T>> v;
  long long step = 0;

  static BasicAdamMoments like(const BasicParamStore<T>& params) {
    BasicAdamMoments s;
    for (const auto& p : params.values()) {
      s.m.push_back({p.layer, BasicTensor<T>(p.weight.shape()), BasicTensor<T>(p.bias.shape())});
      s.v.push_back({p.layer, BasicTensor<T>(p.weight.shape()), BasicTensor<T>(p.bias.shape())});
    }
    return s;
  }
};

using AdamMoments = BasicAdamMoments<float>;

// One Adam update from the accumulated gradients; gradients are zeroed after.
template <typename T>
void adam_step(BasicParamStore<T>& params, BasicAdamMoments<T>& moments, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adam learning rate must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (moments.m.size() != params.values().size()) moments = BasicAdamMoments<T>::like(params);
  ++moments.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(moments.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(moments.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T lr_t = static_cast<T>(cfg.lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(cfg.eps);
  auto update = [&](BasicTensor<T>& p, const BasicTensor<T>& g, BasicTensor<T>& m, BasicTensor<T>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      p[i] -= lr_t * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
    }
  };
  const auto& grads = params.grads();
  params.mutate([&](std::vector<LayerParams<T>>& vals) {
    for (std::size_t k = 0; k < vals.size(); ++k) {
      update(vals[k].weight, grads[k].weight, moments.m[k].weight, moments.v[k].weight);
      update(vals[k].bias, grads[k].bias, moments.m[k].bias, moments.v[k].bias);
    }
  });
  params.zero_grad();
}

}  // namespace shapnav::nn
