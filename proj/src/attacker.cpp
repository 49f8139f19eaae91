#include "fairnvt/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fairnvt/errors.hpp"
#include "fairnvt/losses.hpp"
#include "fairnvt/metrics.hpp"
#include "fairnvt/rng.hpp"

namespace fairnvt::attacker {

namespace {

void validate_inputs(const Tensor& train_x, const std::vector<int>& train_s,
                     const Tensor& test_x, const std::vector<int>& test_s) {
  if (train_x.rank() != 2 || test_x.rank() != 2) {
    throw ShapeError("attacker embeddings must be rank-2");
  }
  if (train_x.shape()[0] != train_s.size() || test_x.shape()[0] != test_s.size()) {
    throw ShapeError("attacker labels are not aligned with the embeddings");
  }
  if (train_x.shape()[1] != test_x.shape()[1]) {
    throw ShapeError("attacker train and test embedding widths differ");
  }
  if (train_s.empty() || test_s.empty()) throw ValueError("attacker split is empty");
}

std::string block_name(std::size_t i) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "probe.layer%02zu", i);
  return buf;
}

ad::Var probe_logits(ad::Tape& tape, const ad::ParamStore& params, ad::Var x,
                     std::size_t hidden_layers) {
  ad::Var h = x;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    const std::string p = block_name(i);
    h = tape.tanh(tape.add_bias(tape.matmul(h, tape.leaf(params, p + ".weight")),
                                tape.leaf(params, p + ".bias")));
  }
  return tape.add_bias(tape.matmul(h, tape.leaf(params, "probe.out.weight")),
                       tape.leaf(params, "probe.out.bias"));
}

}  // namespace

AttackerResult attack(const Tensor& train_x, const std::vector<int>& train_s,
                      const Tensor& test_x, const std::vector<int>& test_s,
                      const AttackerConfig& cfg) {
  validate_inputs(train_x, train_s, test_x, test_s);
  if (cfg.hidden_layers == 0 || cfg.hidden_layers > 99) {
    throw ConfigError("attacker depth must be in [1, 99]");
  }
  if (cfg.batch_size == 0 || cfg.max_epochs == 0 || cfg.plateau_epochs == 0) {
    throw ConfigError("attacker batch size, epoch cap and plateau must be positive");
  }

  int max_s = 0;
  for (int v : train_s) max_s = std::max(max_s, v);
  bool train_varies = false;
  for (int v : train_s) train_varies = train_varies || v != train_s[0];
  if (!train_varies) {
    throw MetricError("attacker undefined: sensitive attribute has a single class");
  }
  for (int v : test_s) max_s = std::max(max_s, v);
  const std::size_t classes = static_cast<std::size_t>(max_s) + 1;
  const std::size_t in_dim = train_x.shape()[1];
  const std::size_t n = train_x.shape()[0];

  ad::ParamStore params;
  RngStream init(cfg.seed, stream_id::kAttackerInit);
  const auto add_linear = [&](const std::string& prefix, std::size_t rows, std::size_t cols) {
    Tensor w({rows, cols});
    fill_gaussian(w, 1.0 / std::sqrt(static_cast<double>(rows)), init);
    params.add(prefix + ".weight", std::move(w), true);
    params.add(prefix + ".bias", Tensor({cols}), true);
  };
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) add_linear(block_name(i), in_dim, in_dim);
  add_linear("probe.out", in_dim, classes);

  train::AdamW opt(cfg.adam);
  RngStream shuffle_root(cfg.seed, stream_id::kDataShuffle);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  AttackerResult result;
  double best_train_acc = -1.0;
  std::size_t stalled = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    RngStream epoch_rng = shuffle_root.substream(epoch);
    shuffle(order, epoch_rng);
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - begin);
      Tensor xb({count, in_dim});
      std::vector<int> sb(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = order[begin + i];
        sb[i] = train_s[r];
        for (std::size_t j = 0; j < in_dim; ++j) xb.at(i, j) = train_x.at(r, j);
      }
      ad::Tape tape;
      const ad::Var logits = probe_logits(tape, params, tape.constant(std::move(xb)),
                                          cfg.hidden_layers);
      const ad::Var loss = losses::cross_entropy(tape, logits, sb);
      const Tensor& lv = tape.value(logits);
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (lv.at(i, c) > lv.at(i, arg)) arg = c;
        }
        if (static_cast<int>(arg) == sb[i]) ++correct;
      }
      opt.step(params, tape.backward(loss, params));
    }
    result.epochs_ran = epoch;

    const double train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
    if (train_acc > best_train_acc + cfg.plateau_improvement) {
      best_train_acc = train_acc;
      stalled = 0;
    } else if (++stalled >= cfg.plateau_epochs) {
      break;
    }
  }

  ad::Tape tape;
  const ad::Var logits = probe_logits(tape, params, tape.constant(test_x), cfg.hidden_layers);
  const Tensor probs = tape.value(tape.softmax_rows(logits));
  std::vector<metrics::EvalRecord> records(test_s.size());
  for (std::size_t i = 0; i < test_s.size(); ++i) {
    metrics::EvalRecord& r = records[i];
    r.y_true = test_s[i];
    r.s = test_s[i];
    r.probs.resize(classes);
    std::size_t arg = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      r.probs[c] = probs.at(i, c);
      if (probs.at(i, c) > probs.at(i, arg)) arg = c;
    }
    r.y_pred = static_cast<int>(arg);
  }
  result.att_acc = metrics::accuracy(records);
  result.balanced_att_acc = metrics::balanced_accuracy(records);
  return result;
}

}  // namespace fairnvt::attacker
