#include "fairnvt/losses.hpp"

#include <string>

#include "fairnvt/errors.hpp"

namespace fairnvt::losses {

namespace {

void check_labels(const Tensor& logits, const std::vector<int>& labels, const char* what) {
  if (logits.rank() != 2) {
    throw ShapeError(std::string(what) + " expects rank-2 logits, got " + logits.shape_str());
  }
  if (labels.size() != logits.shape()[0]) {
    throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(logits.shape()[0]) + " rows");
  }
  const int k = static_cast<int>(logits.shape()[1]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw ValueError(std::string(what) + ": label " + std::to_string(labels[i]) +
                       " at row " + std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
}

// Mean of one probability column over the rows of a group, as a tape scalar.
// Expressed with a constant weight mask so the gradient reaches only the
// group's rows.
ad::Var group_mean(ad::Tape& tape, ad::Var column, const std::vector<int>& s, int group,
                   std::size_t group_size) {
  Tensor mask({s.size()});
  const double w = 1.0 / static_cast<double>(group_size);
  for (std::size_t i = 0; i < s.size(); ++i) mask[i] = s[i] == group ? w : 0.0;
  return tape.sum(tape.mul(column, tape.constant(mask)));
}

}  // namespace

ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels) {
  check_labels(tape.value(logits), labels, "cross_entropy");
  ad::Var logp = tape.log_softmax_rows(logits);
  ad::Var picked = tape.take_per_row(logp, labels);
  return tape.scale(tape.mean(picked), -1.0);
}

ad::Var orthogonality(ad::Tape& tape, ad::Var e_t, ad::Var e_s) {
  return tape.mean(tape.square(tape.cosine_rows(e_t, e_s)));
}

namespace {

ad::Var dp_column_gap(ad::Tape& tape, ad::Var probs, const std::vector<int>& s, int column,
                      std::size_t n0, std::size_t n1) {
  const std::vector<int> idx(s.size(), column);
  ad::Var col = tape.take_per_row(probs, idx);
  ad::Var m0 = group_mean(tape, col, s, 0, n0);
  ad::Var m1 = group_mean(tape, col, s, 1, n1);
  return tape.abs(tape.sub(m0, m1));
}

void count_groups(const std::vector<int>& s, std::size_t& n0, std::size_t& n1) {
  n0 = n1 = 0;
  for (int v : s) {
    if (v == 0) ++n0;
    else if (v == 1) ++n1;
    else throw ValueError("demographic parity loss expects binary sensitive labels, got " +
                          std::to_string(v));
  }
}

}  // namespace

ad::Var demographic_parity_binary(ad::Tape& tape, ad::Var probs, const std::vector<int>& s) {
  const Tensor& p = tape.value(probs);
  if (p.rank() != 2 || p.shape()[1] < 2) {
    throw ShapeError("demographic_parity_binary expects [n x K>=2] probabilities, got " +
                     p.shape_str());
  }
  if (s.size() != p.shape()[0]) {
    throw ShapeError("demographic_parity_binary: sensitive label count mismatch");
  }
  std::size_t n0 = 0, n1 = 0;
  count_groups(s, n0, n1);
  if (n0 == 0 || n1 == 0) return tape.constant(Tensor::scalar(0.0));
  return dp_column_gap(tape, probs, s, 1, n0, n1);
}

ad::Var demographic_parity_multiclass(ad::Tape& tape, ad::Var probs, const std::vector<int>& s) {
  const Tensor& p = tape.value(probs);
  if (p.rank() != 2) {
    throw ShapeError("demographic_parity_multiclass expects rank-2 probabilities");
  }
  if (s.size() != p.shape()[0]) {
    throw ShapeError("demographic_parity_multiclass: sensitive label count mismatch");
  }
  std::size_t n0 = 0, n1 = 0;
  count_groups(s, n0, n1);
  if (n0 == 0 || n1 == 0) return tape.constant(Tensor::scalar(0.0));
  ad::Var acc = dp_column_gap(tape, probs, s, 0, n0, n1);
  for (std::size_t k = 1; k < p.shape()[1]; ++k) {
    acc = tape.add(acc, dp_column_gap(tape, probs, s, static_cast<int>(k), n0, n1));
  }
  return acc;
}

TotalLoss total(ad::Tape& tape, ad::Var task_logits, ad::Var sens_logits, ad::Var e_t,
                ad::Var e_s, const std::vector<int>& y, const std::vector<int>& s,
                const LossWeights& w) {
  ad::Var task = cross_entropy(tape, task_logits, y);
  ad::Var sens = cross_entropy(tape, sens_logits, s);
  ad::Var orth = orthogonality(tape, e_t, e_s);
  ad::Var probs = tape.softmax_rows(task_logits);
  const std::size_t k = tape.value(task_logits).shape()[1];
  ad::Var dp = k == 2 ? demographic_parity_binary(tape, probs, s)
                      : demographic_parity_multiclass(tape, probs, s);

  ad::Var acc = task;
  if (w.beta1 != 0.0) acc = tape.add(acc, tape.scale(sens, w.beta1));
  if (w.beta2 != 0.0) acc = tape.add(acc, tape.scale(orth, w.beta2));
  if (w.beta3 != 0.0) acc = tape.add(acc, tape.scale(dp, w.beta3));

  TotalLoss out;
  out.var = acc;
  out.values.task_ce = tape.value(task).item();
  out.values.sens_ce = tape.value(sens).item();
  out.values.orth = tape.value(orth).item();
  out.values.dp = tape.value(dp).item();
  out.values.total = tape.value(acc).item();
  return out;
}

}  // namespace fairnvt::losses
