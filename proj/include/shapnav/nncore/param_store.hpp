#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/nncore/layer_spec.hpp"
#include "shapnav/nncore/tensor.hpp"

namespace shapnav::nn {

template <typename T>
struct LayerParams {
  int layer = -1;  // index into NetworkSpec::layers()
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

namespace detail {
inline std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Weights and biases of every trainable layer plus matching gradient buffers.
//
// Each distinct parameter state carries a generation number. Any mutation of
// parameter values (and any copy) takes a fresh one, so a ForwardTrace can
// detect when the parameters it was recorded with are no longer current.
template <typename T>
class BasicParamStore {
 public:
  BasicParamStore() : generation_(detail::next_generation()) {}
  BasicParamStore(const BasicParamStore& o)
      : values_(o.values_), grads_(o.grads_), generation_(detail::next_generation()) {}
  BasicParamStore& operator=(const BasicParamStore& o) {
    if (this != &o) {
      values_ = o.values_;
      grads_ = o.grads_;
      generation_ = detail::next_generation();
    }
    return *this;
  }
  BasicParamStore(BasicParamStore&&) noexcept = default;
  BasicParamStore& operator=(BasicParamStore&&) noexcept = default;

  // Zero-valued store shaped for `spec`.
  static BasicParamStore zeros(const NetworkSpec& spec) {
    BasicParamStore s;
    auto layers = resolve(spec);
    for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
      const auto& r = layers[static_cast<std::size_t>(i)];
      if (!r.spec.trainable()) continue;
      LayerParams<T> p;
      p.layer = i;
      if (r.spec.kind == LayerKind::conv2d) {
        p.weight = BasicTensor<T>({r.out_c, r.in_c, r.spec.kernel, r.spec.kernel});
        p.bias = BasicTensor<T>({r.out_c});
      } else {
        p.weight = BasicTensor<T>({r.out_width, r.in_width});
        p.bias = BasicTensor<T>({r.out_width});
      }
      LayerParams<T> g{p.layer, BasicTensor<T>(p.weight.shape()), BasicTensor<T>(p.bias.shape())};
      s.values_.push_back(std::move(p));
      s.grads_.push_back(std::move(g));
    }
    return s;
  }

  // Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  // weights and biases; the last trainable layer is multiplied by
  // `final_layer_scale`.
  static BasicParamStore initialize(const NetworkSpec& spec, std::uint64_t seed,
                                    double final_layer_scale = 0.01) {
    BasicParamStore s = zeros(spec);
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < s.values_.size(); ++k) {
      auto& p = s.values_[k];
      const auto& ws = p.weight.shape();
      int fan_in = 1;
      for (std::size_t d = 1; d < ws.size(); ++d) fan_in *= ws[d];
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      if (k + 1 == s.values_.size()) bound *= final_layer_scale;
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : p.weight.values()) v = static_cast<T>(u(rng));
      for (auto& v : p.bias.values()) v = static_cast<T>(u(rng));
    }
    return s;
  }

  const std::vector<LayerParams<T>>& values() const noexcept { return values_; }
  std::vector<LayerParams<T>>& grads() noexcept { return grads_; }
  const std::vector<LayerParams<T>>& grads() const noexcept { return grads_; }

  int slot_of(int layer) const {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i].layer == layer) return static_cast<int>(i);
    throw ConfigError("no parameters for layer " + std::to_string(layer));
  }
  const LayerParams<T>& at_layer(int layer) const {
    return values_[static_cast<std::size_t>(slot_of(layer))];
  }

  // Runs `f` on the mutable parameter values and takes a new generation.
  template <typename F>
  void mutate(F&& f) {
    f(values_);
    generation_ = detail::next_generation();
  }

  void zero_grad() {
    for (auto& g : grads_) {
      g.weight.fill(T{0});
      g.bias.fill(T{0});
    }
  }

  std::uint64_t generation() const noexcept { return generation_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : values_) n += p.weight.size() + p.bias.size();
    return n;
  }

  template <typename U>
  BasicParamStore<U> cast() const {
    BasicParamStore<U> out;
    out.mutate([&](std::vector<LayerParams<U>>& vals) {
      for (const auto& p : values_) vals.push_back({p.layer, p.weight.template cast<U>(), p.bias.template cast<U>()});
    });
    for (const auto& g : grads_)
      out.grads().push_back({g.layer, g.weight.template cast<U>(), g.bias.template cast<U>()});
    return out;
  }

  // Parameter names in store order: "layer<i>.weight", "layer<i>.bias".
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& p : values_) {
      n.push_back("layer" + std::to_string(p.layer) + ".weight");
      n.push_back("layer" + std::to_string(p.layer) + ".bias");
    }
    return n;
  }

  // Value equality of parameters (bitwise), ignoring gradients.
  bool same_values(const BasicParamStore& o) const {
    if (values_.size() != o.values_.size()) return false;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i].layer != o.values_[i].layer) return false;
      if (!bitwise_equal(values_[i].weight, o.values_[i].weight)) return false;
      if (!bitwise_equal(values_[i].bias, o.values_[i].bias)) return false;
    }
    return true;
  }

 private:
  std::vector<LayerParams<T>> values_;
  std::vector<LayerParams<T>> grads_;
  std::uint64_t generation_;
};

using ParamStore = BasicParamStore<float>;

}  // namespace shapnav::nn
