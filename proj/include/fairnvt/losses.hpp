#pragma once

#include <vector>

#include "fairnvt/tape.hpp"

namespace fairnvt::losses {

// Weights of the secondary loss terms: beta1 scales the sensitive-head
// cross-entropy, beta2 the orthogonality penalty, beta3 the demographic-parity
// surrogate. The task cross-entropy always has weight 1.
struct LossWeights {
  double beta1 = 1.0;
  double beta2 = 0.1;
  double beta3 = 0.3;
};

// Mean negative log-likelihood of the labeled class under row softmax.
ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels);

// Mean squared per-row cosine similarity between the two embedding batches.
ad::Var orthogonality(ad::Tape& tape, ad::Var e_t, ad::Var e_s);

// |mean_{s=0} p1 - mean_{s=1} p1| on the positive-class probability column.
// An empty group makes the loss a constant 0 with zero gradient.
ad::Var demographic_parity_binary(ad::Tape& tape, ad::Var probs, const std::vector<int>& s);

// Sum over classes k of |mean_{s=0} p_k - mean_{s=1} p_k|.
ad::Var demographic_parity_multiclass(ad::Tape& tape, ad::Var probs, const std::vector<int>& s);

struct LossBreakdown {
  double task_ce = 0.0;
  double sens_ce = 0.0;
  double orth = 0.0;
  double dp = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  ad::Var var;
  LossBreakdown values;
};

// task_ce + beta1*sens_ce + beta2*orth + beta3*dp. Terms with weight 0 are
// still evaluated for the breakdown but never enter the gradient graph. The
// binary surrogate is used when the task has two classes, the multiclass sum
// otherwise.
TotalLoss total(ad::Tape& tape, ad::Var task_logits, ad::Var sens_logits, ad::Var e_t,
                ad::Var e_s, const std::vector<int>& y, const std::vector<int>& s,
                const LossWeights& w);

}  // namespace fairnvt::losses
