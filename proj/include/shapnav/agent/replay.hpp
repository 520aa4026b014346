#pragma once

#include <array>
#include <cstddef>
#include <cstring>
#include <vector>

#include "shapnav/error.hpp"
#include "shapnav/nncore/tensor.hpp"
#include "shapnav/rng.hpp"

namespace shapnav::agent {

struct Transition {
  nn::Tensor depth;  // (1, H, W)
  std::array<float, 6> state{};
  std::array<float, 3> action{};  // normalized to [-1, 1]
  float reward = 0;
  nn::Tensor next_depth;
  std::array<float, 6> next_state{};
  bool done = false;
};

struct Batch {
  nn::Tensor image;       // (B, 1, H, W)
  nn::Tensor state;       // (B, 6)
  nn::Tensor action;      // (B, 3)
  nn::Tensor reward;      // (B)
  nn::Tensor next_image;  // (B, 1, H, W)
  nn::Tensor next_state;  // (B, 6)
  nn::Tensor done;        // (B), 0 or 1
  int size() const { return image.rank() ? image.dim(0) : 0; }
};

// Fixed-capacity ring of transitions. Storage grows on demand up to capacity,
// after which the oldest slot is overwritten.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int channels, int height, int width)
      : capacity_(capacity), c_(channels), h_(height), w_(width), pix_(static_cast<std::size_t>(channels) * height * width) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  std::size_t insertions() const { return inserted_; }

  void add(const Transition& t) {
    if (t.depth.size() != pix_ || t.next_depth.size() != pix_)
      throw ConfigError("transition depth size does not match the replay buffer");
    const std::size_t slot = inserted_ % capacity_;
    if (slot == depth_.size() / pix_) {
      depth_.resize(depth_.size() + pix_);
      next_depth_.resize(next_depth_.size() + pix_);
      small_.resize(small_.size() + kSmall);
    }
    std::memcpy(depth_.data() + slot * pix_, t.depth.data(), pix_ * sizeof(float));
    std::memcpy(next_depth_.data() + slot * pix_, t.next_depth.data(), pix_ * sizeof(float));
    float* s = small_.data() + slot * kSmall;
    for (int i = 0; i < 6; ++i) s[i] = t.state[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) s[6 + i] = t.action[static_cast<std::size_t>(i)];
    s[9] = t.reward;
    for (int i = 0; i < 6; ++i) s[10 + i] = t.next_state[static_cast<std::size_t>(i)];
    s[16] = t.done ? 1.0f : 0.0f;
    ++inserted_;
    if (size_ < capacity_) ++size_;
  }

  Transition at(std::size_t slot) const {
    if (slot >= size_) throw ContractViolation("replay slot out of range");
    Transition t;
    t.depth = nn::Tensor({c_, h_, w_}, std::vector<float>(depth_.begin() + slot * pix_, depth_.begin() + (slot + 1) * pix_));
    t.next_depth = nn::Tensor({c_, h_, w_}, std::vector<float>(next_depth_.begin() + slot * pix_,
                                                              next_depth_.begin() + (slot + 1) * pix_));
    const float* s = small_.data() + slot * kSmall;
    for (int i = 0; i < 6; ++i) t.state[static_cast<std::size_t>(i)] = s[i];
    for (int i = 0; i < 3; ++i) t.action[static_cast<std::size_t>(i)] = s[6 + i];
    t.reward = s[9];
    for (int i = 0; i < 6; ++i) t.next_state[static_cast<std::size_t>(i)] = s[10 + i];
    t.done = s[16] != 0.0f;
    return t;
  }

  // Uniform sampling with replacement.
  Batch sample(int n, Rng& rng) const {
    if (n < 1) throw ConfigError("batch size must be >= 1");
    if (size_ < static_cast<std::size_t>(n)) throw ContractViolation("replay buffer smaller than batch size");
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return gather(idx);
  }

  Batch gather(const std::vector<std::size_t>& idx) const {
    const int n = static_cast<int>(idx.size());
    Batch b;
    b.image = nn::Tensor({n, c_, h_, w_});
    b.next_image = nn::Tensor({n, c_, h_, w_});
    b.state = nn::Tensor({n, 6});
    b.next_state = nn::Tensor({n, 6});
    b.action = nn::Tensor({n, 3});
    b.reward = nn::Tensor({n});
    b.done = nn::Tensor({n});
    for (int k = 0; k < n; ++k) {
      const std::size_t slot = idx[static_cast<std::size_t>(k)];
      std::memcpy(b.image.data() + k * pix_, depth_.data() + slot * pix_, pix_ * sizeof(float));
      std::memcpy(b.next_image.data() + k * pix_, next_depth_.data() + slot * pix_, pix_ * sizeof(float));
      const float* s = small_.data() + slot * kSmall;
      for (int i = 0; i < 6; ++i) b.state[static_cast<std::size_t>(k * 6 + i)] = s[i];
      for (int i = 0; i < 3; ++i) b.action[static_cast<std::size_t>(k * 3 + i)] = s[6 + i];
      b.reward[static_cast<std::size_t>(k)] = s[9];
      for (int i = 0; i < 6; ++i) b.next_state[static_cast<std::size_t>(k * 6 + i)] = s[10 + i];
      b.done[static_cast<std::size_t>(k)] = s[16];
    }
    return b;
  }

 private:
  static constexpr std::size_t kSmall = 17;  // state 6, action 3, reward, next state 6, done
  std::size_t capacity_;
  int c_, h_, w_;
  std::size_t pix_;
  std::size_t size_ = 0;
  std::size_t inserted_ = 0;
  std::vector<float> depth_, next_depth_, small_;
};

}  // namespace shapnav::agent
