#pragma once

#include <atomic>
#include <cstdint>

namespace shapnav::instrument {

// Process-wide operation counters. Tests reset them and read deltas.
struct Counters {
  std::atomic<std::uint64_t> network_forward{0};
  std::atomic<std::uint64_t> network_backward{0};
  std::atomic<std::uint64_t> rescale_pass{0};
  std::atomic<std::uint64_t> head_evaluation{0};

  void reset() {
    network_forward = 0;
    network_backward = 0;
    rescale_pass = 0;
    head_evaluation = 0;
  }
};

inline Counters& counters() {
  static Counters c;
  return c;
}

}  // namespace shapnav::instrument
