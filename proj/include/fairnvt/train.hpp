#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairnvt/data.hpp"
#include "fairnvt/losses.hpp"
#include "fairnvt/metrics.hpp"
#include "fairnvt/model.hpp"
#include "fairnvt/tape.hpp"

namespace fairnvt::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam with bias correction. Only trainable parameters
// are touched; moments are created lazily per parameter.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  void step(ad::ParamStore& params, const ad::Gradients& grads);
  std::size_t steps_taken() const { return t_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamConfig cfg_;
  std::map<std::string, Moments> state_;
  std::size_t t_ = 0;
};

// Component switches of the ablation study. Turning one off is bit-identical
// to zeroing its loss weight (or sigma, for the noise switch).
struct Toggles {
  bool fair = true;
  bool orth = true;
  bool noise = true;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t epochs = 20;
  std::size_t eval_every = 1;
  losses::LossWeights weights;
  Toggles toggles;
  std::uint64_t seed = 1;
};

struct TrainResult {
  model::Model best;         // best-validation-accuracy parameters
  std::string log_csv;       // epoch,split,task_ce,sens_ce,orth,dp,acc,bacc,dp_metric,eopp,eo
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  bool aborted = false;      // non-finite value hit; best holds the last good state
  std::string abort_reason;
};

// Joint training over the train split with periodic validation. Deterministic
// given (model config, data, train config).
TrainResult fit(const model::ModelConfig& mcfg, const data::Splits& data, const TrainConfig& cfg);

// FNV-1a over the raw bytes of the selected parameters, in name order.
std::uint64_t params_hash(const ad::ParamStore& params, bool frozen_only);

struct EvalOptions {
  std::size_t draws = 1;
  std::size_t attacker_hidden_layers = 1;
  std::uint64_t seed = 1;
  bool on_val = false;  // score the val split instead of test
};

struct AblationRow {
  std::string label;
  Toggles toggles;
  metrics::MetricsReport report;
};

// Trains and evaluates one model per toggle combination; rows come back in
// grid order regardless of the worker count.
std::vector<AblationRow> run_ablation_grid(const model::ModelConfig& mcfg,
                                           const data::Splits& data, const TrainConfig& base,
                                           const std::vector<Toggles>& grid,
                                           const EvalOptions& eval, std::size_t jobs = 1);

// The 8-cell fair x orth x noise grid, vanilla first, all-on last.
std::vector<Toggles> full_toggle_grid();

const char* toggle_label(const Toggles& t);

}  // namespace fairnvt::train
