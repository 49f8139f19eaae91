#pragma once

#include <cstdint>
#include <vector>

#include "fairnvt/tensor.hpp"
#include "fairnvt/train.hpp"

namespace fairnvt::attacker {

// Leakage probe: a fresh MLP (hidden blocks of width in_dim with tanh, then a
// linear readout) trained to predict the sensitive attribute from embeddings.
struct AttackerConfig {
  std::size_t hidden_layers = 1;  // 1, 3 or 10 in the depth study
  train::AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::size_t plateau_epochs = 5;     // stop after this many stalled epochs
  double plateau_improvement = 0.1;   // points of train accuracy
  std::uint64_t seed = 1;
};

struct AttackerResult {
  double att_acc = 0.0;           // test accuracy x100
  double balanced_att_acc = 0.0;  // balanced test accuracy x100
  std::size_t epochs_ran = 0;
};

// Trains the probe on (train_x, train_s) until the train accuracy plateaus,
// then scores it on (test_x, test_s).
AttackerResult attack(const Tensor& train_x, const std::vector<int>& train_s,
                      const Tensor& test_x, const std::vector<int>& test_s,
                      const AttackerConfig& cfg);

}  // namespace fairnvt::attacker
