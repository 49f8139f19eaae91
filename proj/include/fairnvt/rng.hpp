#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "fairnvt/tensor.hpp"

namespace fairnvt {

// Stream ids for the named randomness consumers. Every run derives all of its
// randomness from one master seed plus these ids, so consumers are mutually
// independent and insensitive to call ordering elsewhere in the program.
namespace stream_id {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kDataShuffle = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kAttackerInit = 4;
inline constexpr std::uint64_t kDataGen = 5;
}  // namespace stream_id

// Counter-based pseudo-random stream: output i is a finalizer applied to
// key + (i+1)*gamma, so draws are pure functions of (seed, stream, counter)
// and substreams can be split without sharing state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + kGamma) ^ mix(stream * 0x6a09e667f3bcc909ULL + 0xbb67ae8584caa73bULL))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (cosine branch).
  double next_gaussian() {
    const double u1 = 1.0 - next_uniform();  // (0, 1], keeps the log finite
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Independent child stream; children with distinct indices never collide
  // with each other or with the parent's own counter sequence.
  RngStream substream(std::uint64_t index) const {
    RngStream child(*this);
    child.key_ = mix(key_ ^ mix(index * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL));
    child.counter_ = 0;
    return child;
  }

  // Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline void fill_gaussian(Tensor& t, double stddev, RngStream& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.next_gaussian();
}

// In-place Fisher-Yates shuffle.
template <class T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace fairnvt
