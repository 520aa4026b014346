#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "shapnav/attrib/head.hpp"
#include "shapnav/error.hpp"
#include "shapnav/instrument.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::attrib {

inline constexpr std::array<const char*, 3> kOutputNames{"v_xy", "v_z", "yaw_rate"};
inline constexpr int kMaxExactFeatures = 20;
inline constexpr double kRescaleGuard = 1e-7;

// CNN_1..CNN_n followed by the six state features.
inline std::vector<std::string> feature_names(int n_cnn) {
  std::vector<std::string> n;
  for (int i = 1; i <= n_cnn; ++i) n.push_back("CNN_" + std::to_string(i));
  for (const char* s : sim::kStateFeatureNames) n.emplace_back(s);
  return n;
}

struct AttributionResult {
  int output_index = 0;
  std::vector<double> phi;
  std::vector<double> input;
  std::vector<double> reference;
  double f_x = 0;
  double f_ref = 0;

  double phi_sum() const {
    double s = 0;
    for (double v : phi) s += v;
    return s;
  }
  // |sum(phi) - (f(x) - f(x'))|
  double efficiency_gap() const { return std::abs(phi_sum() - (f_x - f_ref)); }
  bool locally_accurate(double rel = 1e-5) const {
    return efficiency_gap() < rel * std::max(1.0, std::abs(f_x - f_ref));
  }
};

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

using Predictor = std::function<double(const std::vector<double>&)>;

// Baseline Shapley values by full subset enumeration. A feature outside the
// coalition takes its reference value.
inline AttributionResult exact_shapley(const Predictor& f, const std::vector<double>& x,
                                       const std::vector<double>& ref, int output_index = 0) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(ref.size()) != n) throw ConfigError("input and reference lengths differ");
  if (n > kMaxExactFeatures)
    throw ConfigError("exact Shapley enumeration refused for " + std::to_string(n) + " features (limit " +
                      std::to_string(kMaxExactFeatures) + ")");
  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> v(subsets);
  std::vector<double> z(ref);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? x[static_cast<std::size_t>(i)] : ref[static_cast<std::size_t>(i)];
    v[mask] = f(z);
  }
  // w(s) = s! (n - s - 1)! / n! = 1 / (n C(n - 1, s))
  std::vector<double> w(static_cast<std::size_t>(std::max(n, 1)));
  double binom = 1.0;
  for (int s = 0; s < n; ++s) {
    w[static_cast<std::size_t>(s)] = 1.0 / (n * binom);
    binom = binom * (n - 1 - s) / (s + 1);
  }
  AttributionResult r;
  r.output_index = output_index;
  r.input = x;
  r.reference = ref;
  r.phi.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    const int size = __builtin_popcountll(mask);
    for (int i = 0; i < n; ++i) {
      if ((mask >> i) & 1) continue;
      r.phi[static_cast<std::size_t>(i)] += w[static_cast<std::size_t>(size)] * (v[mask | (std::size_t{1} << i)] - v[mask]);
    }
  }
  r.f_x = v[subsets - 1];
  r.f_ref = v[0];
  return r;
}

inline Predictor head_predictor(const HeadFragment& head, int output_index) {
  return [&head, output_index](const std::vector<double>& z) { return head.eval(to_vec(z))(output_index); };
}

namespace detail {
// Elementwise layer derivative at z.
inline Vec derivative(const HeadLayer& l, const Vec& z) {
  if (l.kind == nn::LayerKind::relu) return (z.array() > 0.0).cast<double>().matrix();
  Vec t = z.array().tanh().matrix();
  return (l.scale.array() * (1.0 - t.array().square())).matrix();
}
}  // namespace detail

// DeepLIFT Rescale propagation through the head. Dense layers pass
// multipliers through W^T; each elementwise nonlinearity scales them by
// (f(z) - f(z')) / (z - z'), or by f'(z) when |z - z'| < 1e-7.
// The reference activations may be supplied from a cache.
inline AttributionResult deepshap_attribute(const HeadFragment& head, const std::vector<double>& x,
                                            const std::vector<double>& ref, int output_index,
                                            const std::vector<Vec>* ref_trace = nullptr) {
  if (output_index < 0 || output_index >= head.output_width()) throw ConfigError("output index out of range");
  std::vector<Vec> ax = head.trace(to_vec(x));
  std::vector<Vec> local;
  if (!ref_trace) {
    local = head.trace(to_vec(ref));
    ref_trace = &local;
  }
  const auto& ar = *ref_trace;
  const auto& layers = head.layers();
  Vec m = Vec::Zero(head.output_width());
  m(output_index) = 1.0;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    const auto& l = layers[static_cast<std::size_t>(i)];
    const Vec& zin = ax[static_cast<std::size_t>(i)];
    const Vec& zref = ar[static_cast<std::size_t>(i)];
    if (l.kind == nn::LayerKind::dense) {
      m = l.weight.transpose() * m;
      continue;
    }
    const Vec& yin = ax[static_cast<std::size_t>(i + 1)];
    const Vec& yref = ar[static_cast<std::size_t>(i + 1)];
    Vec d = detail::derivative(l, zin);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double dz = zin(k) - zref(k);
      const double mult = std::abs(dz) < kRescaleGuard ? d(k) : (yin(k) - yref(k)) / dz;
      m(k) *= mult;
    }
  }
  instrument::counters().rescale_pass.fetch_add(1, std::memory_order_relaxed);
  AttributionResult r;
  r.output_index = output_index;
  r.input = x;
  r.reference = ref;
  r.phi.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r.phi[i] = m(static_cast<Eigen::Index>(i)) * (x[i] - ref[i]);
  r.f_x = ax.back()(output_index);
  r.f_ref = ar.back()(output_index);
  return r;
}

// Gradient times (input - reference). ReLU derivative at 0 is taken as 0.
inline AttributionResult gradient_attribution(const HeadFragment& head, const std::vector<double>& x,
                                              const std::vector<double>& ref, int output_index) {
  if (output_index < 0 || output_index >= head.output_width()) throw ConfigError("output index out of range");
  std::vector<Vec> ax = head.trace(to_vec(x));
  const auto& layers = head.layers();
  Vec g = Vec::Zero(head.output_width());
  g(output_index) = 1.0;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    const auto& l = layers[static_cast<std::size_t>(i)];
    if (l.kind == nn::LayerKind::dense)
      g = l.weight.transpose() * g;
    else
      g = g.cwiseProduct(detail::derivative(l, ax[static_cast<std::size_t>(i)]));
  }
  AttributionResult r;
  r.output_index = output_index;
  r.input = x;
  r.reference = ref;
  r.phi.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r.phi[i] = g(static_cast<Eigen::Index>(i)) * (x[i] - ref[i]);
  r.f_x = ax.back()(output_index);
  r.f_ref = head.eval(to_vec(ref))(output_index);
  return r;
}

}  // namespace shapnav::attrib
