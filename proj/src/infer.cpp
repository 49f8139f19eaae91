#include "fairnvt/infer.hpp"

#include <algorithm>

#include "fairnvt/attacker.hpp"
#include "fairnvt/errors.hpp"
#include "fairnvt/tape.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::infer {

PredictResult predict(const model::Model& m, const data::Dataset& d, std::size_t draws,
                      RngStream noise) {
  if (draws == 0) throw ConfigError("draw count must be at least 1");
  if (d.dim() != m.config().encoder.input_dim) {
    throw ShapeError("dataset width " + std::to_string(d.dim()) +
                     " does not match the checkpoint input width " +
                     std::to_string(m.config().encoder.input_dim));
  }
  const std::size_t n = d.size();
  const std::size_t classes = m.config().task_classes;

  // Without noise every pass is identical, so one pass carries the whole
  // ensemble and the mean stays bit-equal to the single draw.
  if (m.noise_stddev() == 0.0) draws = 1;

  PredictResult out;
  std::vector<std::vector<std::size_t>> votes(n, std::vector<std::size_t>(classes, 0));
  std::vector<std::vector<double>> prob_sums(n, std::vector<double>(classes, 0.0));

  for (std::size_t pass = 0; pass < draws; ++pass) {
    ad::Tape tape;
    const auto fwd = m.forward(tape, d.x, noise);
    const Tensor& probs = tape.value(tape.softmax_rows(fwd.task_logits));
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      for (std::size_t c = 0; c < classes; ++c) {
        prob_sums[i][c] += probs.at(i, c);
        if (probs.at(i, c) > probs.at(i, arg)) arg = c;
      }
      ++votes[i][arg];
    }
    if (pass == 0) out.embeddings = tape.value(fwd.e_f);
  }

  out.records.resize(n);
  const double count = static_cast<double>(draws);
  for (std::size_t i = 0; i < n; ++i) {
    metrics::EvalRecord& r = out.records[i];
    r.y_true = d.y[i];
    r.s = d.s[i];
    r.probs.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) r.probs[c] = prob_sums[i][c] / count;

    const std::size_t top_votes = *std::max_element(votes[i].begin(), votes[i].end());
    std::size_t winner = 0;
    bool found = false;
    for (std::size_t c = 0; c < classes; ++c) {
      if (votes[i][c] != top_votes) continue;
      if (!found || r.probs[c] > r.probs[winner]) {
        winner = c;
        found = true;
      }
    }
    r.y_pred = static_cast<int>(winner);
  }
  return out;
}

metrics::MetricsReport run_eval(const model::Model& m, const data::Splits& data,
                                const train::EvalOptions& opts) {
  RngStream noise_root(opts.seed, stream_id::kNoise);
  const data::Dataset& scored = opts.on_val ? data.val : data.test;
  const PredictResult test = predict(m, scored, opts.draws, noise_root.substream(0));
  const PredictResult train_emb = predict(m, data.train, 1, noise_root.substream(1));

  metrics::MetricsReport report;
  report.acc = metrics::accuracy(test.records);
  report.bacc = metrics::balanced_accuracy(test.records);
  report.dp = metrics::demographic_parity(test.records);
  report.eopp = metrics::equal_opportunity(test.records);
  report.eo = metrics::equalized_odds(test.records);

  attacker::AttackerConfig acfg;
  acfg.hidden_layers = opts.attacker_hidden_layers;
  acfg.seed = opts.seed;
  const attacker::AttackerResult probe =
      attacker::attack(train_emb.embeddings, data.train.s, test.embeddings, scored.s, acfg);
  report.att_acc = probe.att_acc;
  report.balanced_att_acc = probe.balanced_att_acc;
  return report;
}

std::string predictions_csv(const data::Dataset& d, const PredictResult& r) {
  if (d.size() != r.records.size()) throw ShapeError("records are not aligned with the dataset");
  const std::size_t classes = r.records.empty() ? 0 : r.records[0].probs.size();
  std::string out = "id,y_true,s,y_pred";
  for (std::size_t c = 0; c < classes; ++c) {
    out += ",p_";
    out += std::to_string(c);
  }
  out += '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    const metrics::EvalRecord& rec = r.records[i];
    out += d.id[i];
    out += ',';
    out += std::to_string(rec.y_true);
    out += ',';
    out += std::to_string(rec.s);
    out += ',';
    out += std::to_string(rec.y_pred);
    for (std::size_t c = 0; c < classes; ++c) {
      out += ',';
      out += textio::fmt_g17(rec.probs[c]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace fairnvt::infer
