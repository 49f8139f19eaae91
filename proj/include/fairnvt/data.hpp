#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairnvt/tensor.hpp"

namespace fairnvt::data {

// One split of (features, task label, sensitive label) triples. Immutable
// after construction; safe to share across threads.
struct Dataset {
  Tensor x;                     // [n x d]
  std::vector<int> y;           // task labels
  std::vector<int> s;           // sensitive labels
  std::vector<std::string> id;  // opaque row ids, preserved by save/load
  std::string split;            // train, val or test

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.rank() == 2 ? x.shape()[1] : 0; }
  int max_label(const std::vector<int>& v) const;
  int task_classes() const { return max_label(y) + 1; }
  int sens_classes() const { return max_label(s) + 1; }
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Synthetic generator: y and s are Bernoulli with a shared-latent Gaussian
// copula, features are direction bundles scaled by the labels plus isotropic
// noise. rho controls how strongly s leaks into the features.
struct SynthConfig {
  std::size_t n_per_split = 5000;
  std::size_t dim = 32;
  double rho = 0.9;        // in [0, 1]
  double task_sep = 1.0;   // > 0
  double base_rate_y = 0.5;
  double base_rate_s = 0.5;
  std::uint64_t seed = 1;
};

Splits generate(const SynthConfig& cfg);

// CSV round-trip, usable both for raw features and exported embeddings.
// Header id,y,s,f_0..f_{d-1}; one row per sample; 17-significant-digit floats.
void save_csv(const Dataset& d, const std::string& path);
Dataset load_csv(const std::string& path, const std::string& split);

// Writes train/val/test CSVs into dir; loads them back.
void save_splits(const Splits& sp, const std::string& dir);
Splits load_splits(const std::string& dir);

}  // namespace fairnvt::data
