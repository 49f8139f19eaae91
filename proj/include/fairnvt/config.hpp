#pragma once

#include <map>
#include <set>
#include <string>

#include "fairnvt/model.hpp"
#include "fairnvt/train.hpp"

namespace fairnvt::config {

// Flat key=value text with dotted section prefixes, '#' comments and blank
// lines. Every key must be consumed by a getter before finish(), so typos
// fail loudly instead of silently using defaults.
class ConfigReader {
 public:
  static ConfigReader from_string(const std::string& text, const std::string& origin);
  static ConfigReader from_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Throws ConfigError when any key was never consumed.
  void finish() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

struct TrainSpec {
  model::ModelConfig model;  // input_dim and class counts filled in from data
  train::TrainConfig train;
  bool has_seed = false;  // false: apply the FAIRNVT_SEED fallback
};

// Reads the full training configuration. The caller overlays data-derived
// fields (input_dim, task/sens classes) and the seed fallback afterwards.
TrainSpec load_train_spec(const std::string& path);

}  // namespace fairnvt::config
