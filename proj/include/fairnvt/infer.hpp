#pragma once

#include <string>
#include <vector>

#include "fairnvt/data.hpp"
#include "fairnvt/metrics.hpp"
#include "fairnvt/model.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/train.hpp"

namespace fairnvt::infer {

struct PredictResult {
  std::vector<metrics::EvalRecord> records;  // probs are the mean over draws
  Tensor embeddings;                         // first draw's e_f, [n x fused_dim]
};

// k noise draws per sample; the label is the majority vote over draws, ties
// resolved toward the class with the higher mean softmax probability and then
// the lower index. The exported embedding is always the first draw's e_f.
PredictResult predict(const model::Model& m, const data::Dataset& d, std::size_t draws,
                      RngStream noise);

// Test-split metrics plus the leakage probe: the attacker trains on train
// split embeddings and is scored on test split embeddings. Sensitive labels
// feed only the metrics and the probe, never the model input.
metrics::MetricsReport run_eval(const model::Model& m, const data::Splits& data,
                                const train::EvalOptions& opts);

// CSV dump id,y_true,s,y_pred,p_0..p_{K-1}.
std::string predictions_csv(const data::Dataset& d, const PredictResult& r);

}  // namespace fairnvt::infer
