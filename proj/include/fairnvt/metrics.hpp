#pragma once

#include <string>
#include <vector>

namespace fairnvt::metrics {

// One evaluated sample: true task label, predicted label, sensitive attribute,
// and the task posterior the prediction was made from.
struct EvalRecord {
  int y_true = 0;
  int y_pred = 0;
  int s = 0;
  std::vector<double> probs;
};

// All values on the x100 scale (percentage points).
struct MetricsReport {
  double acc = 0.0;
  double bacc = 0.0;
  double dp = 0.0;
  double eopp = 0.0;
  double eo = 0.0;
  double att_acc = 0.0;
  double balanced_att_acc = 0.0;
};

double accuracy(const std::vector<EvalRecord>& records);

// Mean per-class recall over all task classes; a class with no true samples
// makes the metric undefined.
double balanced_accuracy(const std::vector<EvalRecord>& records);

// (max_s P(yhat=1 | s) - min_s P(yhat=1 | s)) * 100 over the observed groups.
double demographic_parity(const std::vector<EvalRecord>& records);

// |TPR_{s=0} - TPR_{s=1}| * 100. Binary task and binary group only.
double equal_opportunity(const std::vector<EvalRecord>& records);

// 0.5 * sum_y |P(yhat=1 | y, s=0) - P(yhat=1 | y, s=1)| * 100.
double equalized_odds(const std::vector<EvalRecord>& records);

// Flat key=value lines, four decimal places, keys in fixed order:
// acc, bacc, dp, eopp, eo, att_acc, balanced_att_acc.
std::string serialize_report(const MetricsReport& report);
MetricsReport parse_report(const std::string& text);

}  // namespace fairnvt::metrics
