#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/instrument.hpp"
#include "shapnav/nncore/layer_spec.hpp"
#include "shapnav/nncore/param_store.hpp"
#include "shapnav/nncore/tensor.hpp"

namespace shapnav::nn {

// Activations retained from one forward pass. Every activation carries a
// leading batch dimension.
template <typename T>
struct BasicForwardTrace {
  std::vector<ResolvedLayer> layers;
  BasicTensor<T> image;                 // (N, C, H, W)
  BasicTensor<T> state;                 // (N, S)
  std::vector<BasicTensor<T>> outputs;  // one per layer
  std::uint64_t generation = 0;
  int batch = 0;

  int layer_count() const { return static_cast<int>(outputs.size()); }
  const BasicTensor<T>& input_of(int i) const {
    return i == 0 ? image : outputs[static_cast<std::size_t>(i - 1)];
  }
  const BasicTensor<T>& output_of(int i) const { return outputs[static_cast<std::size_t>(i)]; }
};

template <typename T>
struct BasicForwardResult {
  BasicTensor<T> outputs;  // (N, output_width)
  BasicForwardTrace<T> trace;
};

template <typename T>
struct BasicInputGrads {
  BasicTensor<T> image;  // empty when not requested
  BasicTensor<T> state;
};

struct BackwardOptions {
  bool param_grads = true;  // accumulate into the store's gradient buffers
  bool image_grad = true;   // propagate down to the image input
};

using ForwardTrace = BasicForwardTrace<float>;
using ForwardResult = BasicForwardResult<float>;
using InputGrads = BasicInputGrads<float>;

namespace detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;

// Output columns [lo, hi) whose input column ox * s - pad + kx is in range.
inline void valid_range(int out_w, int in_w, int s, int pad, int kx, int& lo, int& hi) {
  lo = 0;
  while (lo < out_w && lo * s - pad + kx < 0) ++lo;
  hi = out_w;
  while (hi > lo && (hi - 1) * s - pad + kx >= in_w) --hi;
}

// Unfolds one (C, H, W) image into columns [col0, col0 + P) of a (K x ncols)
// row-major matrix, K = C * k * k.
template <typename T>
void im2col(const T* x, const ResolvedLayer& r, T* col, int ncols, int col0) {
  const int k = r.spec.kernel, s = r.spec.stride, pad = r.pad;
  for (int c = 0; c < r.in_c; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * r.in_h * r.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ncols + col0;
        int lo, hi;
        valid_range(r.out_w, r.in_w, s, pad, kx, lo, hi);
        for (int oy = 0; oy < r.out_h; ++oy) {
          int iy = oy * s - pad + ky;
          T* dst = row + oy * r.out_w;
          if (iy < 0 || iy >= r.in_h) {
            for (int ox = 0; ox < r.out_w; ++ox) dst[ox] = T{0};
            continue;
          }
          const T* src = xc + iy * r.in_w - pad + kx;
          for (int ox = 0; ox < lo; ++ox) dst[ox] = T{0};
          if (s == 2)
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[2 * ox];
          else
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * s];
          for (int ox = hi; ox < r.out_w; ++ox) dst[ox] = T{0};
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ResolvedLayer& r, T* dx, int ncols, int col0) {
  const int k = r.spec.kernel, s = r.spec.stride, pad = r.pad;
  for (int c = 0; c < r.in_c; ++c) {
    T* xc = dx + static_cast<std::size_t>(c) * r.in_h * r.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ncols + col0;
        int lo, hi;
        valid_range(r.out_w, r.in_w, s, pad, kx, lo, hi);
        for (int oy = 0; oy < r.out_h; ++oy) {
          int iy = oy * s - pad + ky;
          if (iy < 0 || iy >= r.in_h) continue;
          const T* src = row + oy * r.out_w;
          T* dst = xc + iy * r.in_w - pad + kx;
          for (int ox = lo; ox < hi; ++ox) dst[ox * s] += src[ox];
        }
      }
    }
  }
}

// Images per im2col chunk, sized so the unfolded chunk stays cache resident.
inline int conv_chunk(const ResolvedLayer& r, int n) {
  const int K = r.in_c * r.spec.kernel * r.spec.kernel;
  const int P = r.out_h * r.out_w;
  int c = std::max(1, (1 << 17) / std::max(1, K * P));
  return std::min(c, std::max(1, n));
}

template <typename T>
BasicTensor<T> conv_forward(const ResolvedLayer& r, const LayerParams<T>& p, const BasicTensor<T>& x, int n) {
  const int K = r.in_c * r.spec.kernel * r.spec.kernel;
  const int P = r.out_h * r.out_w;
  const int chunk = conv_chunk(r, n);
  const std::size_t in_stride = static_cast<std::size_t>(r.in_c) * r.in_h * r.in_w;
  std::vector<T> col(static_cast<std::size_t>(K) * chunk * P);
  Mat<T> prod(r.out_c, chunk * P);
  CMapMat<T> w(p.weight.data(), r.out_c, K);
  BasicTensor<T> y({n, r.out_c, r.out_h, r.out_w});
  for (int b0 = 0; b0 < n; b0 += chunk) {
    const int cb = std::min(chunk, n - b0);
    const int NP = cb * P;
    for (int b = 0; b < cb; ++b) im2col(x.data() + (b0 + b) * in_stride, r, col.data(), NP, b * P);
    prod.leftCols(NP).noalias() = w * CMapMat<T>(col.data(), K, NP);
    for (int b = 0; b < cb; ++b)
      for (int co = 0; co < r.out_c; ++co) {
        T* dst = y.data() + (static_cast<std::size_t>(b0 + b) * r.out_c + co) * P;
        const T* src = prod.data() + static_cast<std::size_t>(co) * prod.cols() + b * P;
        const T bias = p.bias[static_cast<std::size_t>(co)];
        for (int q = 0; q < P; ++q) dst[q] = src[q] + bias;
      }
  }
  return y;
}

template <typename T>
void conv_backward(const ResolvedLayer& r, const LayerParams<T>& p, const BasicTensor<T>& x,
                   const BasicTensor<T>& dy, int n, LayerParams<T>* grad, BasicTensor<T>* dx) {
  const int K = r.in_c * r.spec.kernel * r.spec.kernel;
  const int P = r.out_h * r.out_w;
  const int chunk = conv_chunk(r, n);
  const std::size_t in_stride = static_cast<std::size_t>(r.in_c) * r.in_h * r.in_w;
  Mat<T> dym(r.out_c, chunk * P);
  std::vector<T> col(static_cast<std::size_t>(K) * chunk * P);
  CMapMat<T> w(p.weight.data(), r.out_c, K);
  Mat<T> dw;
  if (grad) dw = Mat<T>::Zero(r.out_c, K);
  if (dx) *dx = BasicTensor<T>({n, r.in_c, r.in_h, r.in_w});
  for (int b0 = 0; b0 < n; b0 += chunk) {
    const int cb = std::min(chunk, n - b0);
    const int NP = cb * P;
    for (int b = 0; b < cb; ++b)
      for (int co = 0; co < r.out_c; ++co) {
        const T* src = dy.data() + (static_cast<std::size_t>(b0 + b) * r.out_c + co) * P;
        T* dst = dym.data() + static_cast<std::size_t>(co) * dym.cols() + b * P;
        for (int q = 0; q < P; ++q) dst[q] = src[q];
      }
    auto dyc = dym.leftCols(NP);
    if (grad) {
      for (int b = 0; b < cb; ++b) im2col(x.data() + (b0 + b) * in_stride, r, col.data(), NP, b * P);
      dw.noalias() += dyc * CMapMat<T>(col.data(), K, NP).transpose();
      for (int co = 0; co < r.out_c; ++co) grad->bias[static_cast<std::size_t>(co)] += dyc.row(co).sum();
    }
    if (dx) {
      MapMat<T> dcol(col.data(), K, NP);
      dcol.noalias() = w.transpose() * dyc;
      for (int b = 0; b < cb; ++b) col2im_add(col.data(), r, dx->data() + (b0 + b) * in_stride, NP, b * P);
    }
  }
  if (grad) MapMat<T>(grad->weight.data(), r.out_c, K) += dw;
}

template <typename T>
BasicTensor<T> dense_forward(const ResolvedLayer& r, const LayerParams<T>& p, const BasicTensor<T>& x, int n) {
  BasicTensor<T> y({n, r.out_width});
  MapMat<T> ym(y.data(), n, r.out_width);
  ym.noalias() = CMapMat<T>(x.data(), n, r.in_width) *
                 CMapMat<T>(p.weight.data(), r.out_width, r.in_width).transpose();
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < r.out_width; ++j) ym(b, j) += p.bias[static_cast<std::size_t>(j)];
  return y;
}

template <typename T>
void dense_backward(const ResolvedLayer& r, const LayerParams<T>& p, const BasicTensor<T>& x,
                    const BasicTensor<T>& dy, int n, LayerParams<T>* grad, BasicTensor<T>* dx) {
  CMapMat<T> dym(dy.data(), n, r.out_width);
  if (grad) {
    MapMat<T>(grad->weight.data(), r.out_width, r.in_width).noalias() +=
        dym.transpose() * CMapMat<T>(x.data(), n, r.in_width);
    for (int j = 0; j < r.out_width; ++j) grad->bias[static_cast<std::size_t>(j)] += dym.col(j).sum();
  }
  if (dx) {
    *dx = BasicTensor<T>({n, r.in_width});
    MapMat<T>(dx->data(), n, r.in_width).noalias() =
        dym * CMapMat<T>(p.weight.data(), r.out_width, r.in_width);
  }
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.values()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
BasicTensor<T> gap_forward(const ResolvedLayer& r, const BasicTensor<T>& x, int n) {
  BasicTensor<T> y({n, r.in_c});
  const int P = r.in_h * r.in_w;
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < r.in_c; ++c) {
      const T* src = x.data() + (static_cast<std::size_t>(b) * r.in_c + c) * P;
      T acc{0};
      for (int q = 0; q < P; ++q) acc += src[q];
      y[static_cast<std::size_t>(b) * r.in_c + c] = acc / static_cast<T>(P);
    }
  return y;
}

template <typename T>
BasicTensor<T> concat_forward(const ResolvedLayer& r, const BasicTensor<T>& feats,
                              const BasicTensor<T>& state, int n) {
  const int c = r.in_width, s = r.out_width - r.in_width;
  BasicTensor<T> y({n, r.out_width});
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(b) * r.out_width + j] = feats[static_cast<std::size_t>(b) * c + j];
    for (int j = 0; j < s; ++j) y[static_cast<std::size_t>(b) * r.out_width + c + j] = state[static_cast<std::size_t>(b) * s + j];
  }
  return y;
}

template <typename T>
BasicTensor<T> tanh_scale_forward(const ResolvedLayer& r, const BasicTensor<T>& x, int n) {
  BasicTensor<T> y = x;
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < r.out_width; ++j) {
      auto i = static_cast<std::size_t>(b) * r.out_width + j;
      y[i] = static_cast<T>(r.spec.scale[static_cast<std::size_t>(j)]) * std::tanh(x[i]) +
             static_cast<T>(r.spec.offset[static_cast<std::size_t>(j)]);
    }
  return y;
}

template <typename T>
BasicTensor<T> apply_layer(const ResolvedLayer& r, const BasicParamStore<T>& params, int layer_index,
                           const BasicTensor<T>& x, const BasicTensor<T>& state, int n) {
  switch (r.spec.kind) {
    case LayerKind::conv2d: return conv_forward(r, params.at_layer(layer_index), x, n);
    case LayerKind::dense: return dense_forward(r, params.at_layer(layer_index), x, n);
    case LayerKind::relu: return relu_forward(x);
    case LayerKind::gap: return gap_forward(r, x, n);
    case LayerKind::concat: return concat_forward(r, x, state, n);
    case LayerKind::tanh_scale: return tanh_scale_forward(r, x, n);
  }
  throw ConfigError("unsupported layer kind");
}

}  // namespace detail

// Runs the network on a batch. `image` is (C, H, W) or (N, C, H, W); `state`
// is (S) or (N, S). Outputs are (N, output_width).
template <typename T>
BasicForwardResult<T> forward(const NetworkSpec& spec, const BasicParamStore<T>& params,
                              const BasicTensor<T>& image, const BasicTensor<T>& state) {
  BasicForwardResult<T> res;
  auto& tr = res.trace;
  tr.layers = resolve(spec);
  const auto& im = spec.image;
  int n = 0;
  if (image.rank() == 3 && image.shape() == Shape{im.channels, im.height, im.width}) {
    n = 1;
  } else if (image.rank() == 4 && image.dim(1) == im.channels && image.dim(2) == im.height &&
             image.dim(3) == im.width) {
    n = image.dim(0);
  } else {
    throw ConfigError("image shape " + shape_str(image.shape()) + " does not match network input " +
                      shape_str({im.channels, im.height, im.width}));
  }
  if (static_cast<int>(state.size()) != n * spec.state_width)
    throw ConfigError("state length " + std::to_string(state.size()) + " does not match batch " +
                      std::to_string(n) + " x state_width " + std::to_string(spec.state_width));
  tr.batch = n;
  tr.image = image;
  tr.image.reshape({n, im.channels, im.height, im.width});
  tr.state = state;
  tr.state.reshape({n, spec.state_width});
  tr.generation = params.generation();
  tr.outputs.reserve(tr.layers.size());
  for (int i = 0; i < static_cast<int>(tr.layers.size()); ++i) {
    const auto& r = tr.layers[static_cast<std::size_t>(i)];
    BasicTensor<T> y = detail::apply_layer(r, params, i, tr.input_of(i), tr.state, n);
    if (!y.all_finite())
      throw NumericError("non-finite activation in layer " + std::to_string(i) + " (" +
                         kind_name(r.spec.kind) + ")");
    tr.outputs.push_back(std::move(y));
  }
  res.outputs = tr.outputs.back();
  instrument::counters().network_forward.fetch_add(1, std::memory_order_relaxed);
  return res;
}

// Re-runs layer `i` on its traced input.
template <typename T>
BasicTensor<T> replay_layer(const BasicForwardTrace<T>& trace, const BasicParamStore<T>& params, int i) {
  const auto& r = trace.layers.at(static_cast<std::size_t>(i));
  return detail::apply_layer(r, params, i, trace.input_of(i), trace.state, trace.batch);
}

// Back-propagates `output_grad` (N, output_width) through a trace recorded
// with the same parameter generation. Parameter gradients are accumulated
// into `params.grads()`; input gradients are returned.
template <typename T>
BasicInputGrads<T> backward(const BasicForwardTrace<T>& trace, BasicParamStore<T>& params,
                            const BasicTensor<T>& output_grad, BackwardOptions opts = {}) {
  if (trace.generation != params.generation())
    throw ContractViolation("backward called with a stale trace: parameters changed since forward");
  const int n = trace.batch;
  const auto& last = trace.layers.back();
  if (static_cast<int>(output_grad.size()) != n * last.out_width)
    throw ConfigError("output gradient shape " + shape_str(output_grad.shape()) + " does not match outputs");

  BasicInputGrads<T> res;
  BasicTensor<T> g = output_grad;
  g.reshape({n, last.out_width});
  const bool need_branch = opts.param_grads || opts.image_grad;
  for (int i = trace.layer_count() - 1; i >= 0; --i) {
    const auto& r = trace.layers[static_cast<std::size_t>(i)];
    const BasicTensor<T>& x = trace.input_of(i);
    switch (r.spec.kind) {
      case LayerKind::tanh_scale: {
        for (std::size_t k = 0; k < g.size(); ++k) {
          auto j = k % static_cast<std::size_t>(r.out_width);
          T t = std::tanh(x[k]);
          g[k] *= static_cast<T>(r.spec.scale[j]) * (T{1} - t * t);
        }
        break;
      }
      case LayerKind::relu: {
        for (std::size_t k = 0; k < g.size(); ++k)
          if (!(x[k] > T{0})) g[k] = T{0};
        break;
      }
      case LayerKind::dense: {
        int slot = params.slot_of(i);
        BasicTensor<T> dx;
        detail::dense_backward(r, params.values()[static_cast<std::size_t>(slot)], x, g, n,
                               opts.param_grads ? &params.grads()[static_cast<std::size_t>(slot)] : nullptr, &dx);
        g = std::move(dx);
        break;
      }
      case LayerKind::concat: {
        const int c = r.in_width, s = r.out_width - r.in_width;
        BasicTensor<T> gf({n, c});
        res.state = BasicTensor<T>({n, s});
        for (int b = 0; b < n; ++b) {
          for (int j = 0; j < c; ++j) gf[static_cast<std::size_t>(b) * c + j] = g[static_cast<std::size_t>(b) * r.out_width + j];
          for (int j = 0; j < s; ++j) res.state[static_cast<std::size_t>(b) * s + j] = g[static_cast<std::size_t>(b) * r.out_width + c + j];
        }
        g = std::move(gf);
        break;
      }
      case LayerKind::gap: {
        const int P = r.in_h * r.in_w;
        BasicTensor<T> dx({n, r.in_c, r.in_h, r.in_w});
        const T inv = T{1} / static_cast<T>(P);
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < r.in_c; ++c) {
            T v = g[static_cast<std::size_t>(b) * r.in_c + c] * inv;
            T* dst = dx.data() + (static_cast<std::size_t>(b) * r.in_c + c) * P;
            for (int q = 0; q < P; ++q) dst[q] = v;
          }
        g = std::move(dx);
        break;
      }
      case LayerKind::conv2d: {
        int slot = params.slot_of(i);
        bool want_dx = i > 0 || opts.image_grad;
        BasicTensor<T> dx;
        detail::conv_backward(r, params.values()[static_cast<std::size_t>(slot)], x, g, n,
                              opts.param_grads ? &params.grads()[static_cast<std::size_t>(slot)] : nullptr,
                              want_dx ? &dx : nullptr);
        g = std::move(dx);
        break;
      }
    }
    if (r.spec.kind == LayerKind::concat && !need_branch) break;
    if (i == 0 && opts.image_grad) res.image = std::move(g);
  }
  if (!res.state.all_finite() || !res.image.all_finite())
    throw NumericError("non-finite input gradient");
  if (opts.param_grads)
    for (const auto& pg : params.grads())
      if (!pg.weight.all_finite() || !pg.bias.all_finite())
        throw NumericError("non-finite parameter gradient in layer " + std::to_string(pg.layer));
  instrument::counters().network_backward.fetch_add(1, std::memory_order_relaxed);
  return res;
}

}  // namespace shapnav::nn
