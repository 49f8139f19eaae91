#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fairnvt/rng.hpp"
#include "fairnvt/tensor.hpp"

namespace test_util {

// Standard-normal tensor from a throwaway stream.
inline fairnvt::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  fairnvt::RngStream rng(seed, 999);
  fairnvt::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_gaussian();
  return t;
}

// Random tensor with |entries| bounded away from zero, for ops with kinks
// (relu, abs) where finite differences straddle the non-smooth point.
inline fairnvt::Tensor random_tensor_away_from(std::vector<std::size_t> shape,
                                               std::uint64_t seed, double margin) {
  fairnvt::Tensor t = random_tensor(std::move(shape), seed);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::fabs(t[i]) < margin) t[i] = t[i] < 0.0 ? -margin : margin;
  }
  return t;
}

}  // namespace test_util
