#include "fairnvt/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "fairnvt/errors.hpp"
#include "fairnvt/infer.hpp"
#include "fairnvt/kernels.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::train {

namespace {

Tensor rows_subset(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t count) {
  const std::size_t d = x.shape()[1];
  Tensor out({count, d});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = idx[begin + i];
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = x.at(r, j);
  }
  return out;
}

template <typename T>
std::vector<T> subset(const std::vector<T>& v, const std::vector<std::size_t>& idx,
                      std::size_t begin, std::size_t count) {
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(v[idx[begin + i]]);
  return out;
}

// Metrics that are undefined on a record batch log as nan rather than
// aborting the run.
double metric_or_nan(double (*f)(const std::vector<metrics::EvalRecord>&),
                     const std::vector<metrics::EvalRecord>& records) {
  try {
    return f(records);
  } catch (const MetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<metrics::EvalRecord> records_from_batch(const Tensor& probs,
                                                    const std::vector<int>& y,
                                                    const std::vector<int>& s) {
  const std::size_t n = probs.shape()[0];
  const std::size_t k = probs.shape()[1];
  std::vector<metrics::EvalRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    metrics::EvalRecord& r = out[i];
    r.y_true = y[i];
    r.s = s[i];
    r.probs.resize(k);
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      r.probs[c] = probs.at(i, c);
      if (probs.at(i, c) > probs.at(i, arg)) arg = c;
    }
    r.y_pred = static_cast<int>(arg);
  }
  return out;
}

std::string log_row(std::size_t epoch, const char* split, const losses::LossBreakdown& comps,
                    const std::vector<metrics::EvalRecord>& records) {
  std::string row = std::to_string(epoch);
  row += ',';
  row += split;
  for (double v : {comps.task_ce, comps.sens_ce, comps.orth, comps.dp}) {
    row += ',';
    row += textio::fmt_g17(v);
  }
  for (auto f : {&metrics::accuracy, &metrics::balanced_accuracy, &metrics::demographic_parity,
                 &metrics::equal_opportunity, &metrics::equalized_odds}) {
    row += ',';
    row += textio::fmt_g17(metric_or_nan(*f, records));
  }
  row += '\n';
  return row;
}

}  // namespace

void AdamW::step(ad::ParamStore& params, const ad::Gradients& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads.by_name) {
    if (!params.contains(name) || !params.trainable(name)) {
      throw ValueError("gradient for unknown or frozen parameter '" + name + "'");
    }
    Tensor& w = params.value(name);
    if (w.shape() != g.shape()) {
      throw ShapeError("gradient shape mismatch for '" + name + "'");
    }
    auto [it, fresh] =
        state_.try_emplace(name, Moments{Tensor::zeros_like(w), Tensor::zeros_like(w)});
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= cfg_.lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * w[i]);
      if (!std::isfinite(w[i])) {
        throw NumericAbort("non-finite update for parameter '" + name + "'");
      }
    }
  }
}

std::uint64_t params_hash(const ad::ParamStore& params, bool frozen_only) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto feed = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& name : params.names()) {
    if (frozen_only && params.trainable(name)) continue;
    feed(name.data(), name.size());
    const Tensor& t = params.value(name);
    feed(t.data(), t.size() * sizeof(double));
  }
  return h;
}

TrainResult fit(const model::ModelConfig& mcfg, const data::Splits& data,
                const TrainConfig& cfg) {
  if (data.train.size() == 0) throw ValueError("train split is empty");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || cfg.eval_every == 0) {
    throw ConfigError("batch size, epochs and eval-every must be positive");
  }

  model::ModelConfig eff_mcfg = mcfg;
  eff_mcfg.noise.enabled = eff_mcfg.noise.enabled && cfg.toggles.noise;
  losses::LossWeights eff_w = cfg.weights;
  if (!cfg.toggles.orth) eff_w.beta2 = 0.0;
  if (!cfg.toggles.fair) eff_w.beta3 = 0.0;

  model::Model model = model::Model::init(eff_mcfg, cfg.seed);
  AdamW opt(cfg.adam);
  RngStream shuffle_root(cfg.seed, stream_id::kDataShuffle);
  RngStream noise_root(cfg.seed, stream_id::kNoise);
  RngStream train_noise = noise_root.substream(0);

  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.log_csv = "epoch,split,task_ce,sens_ce,orth,dp,acc,bacc,dp_metric,eopp,eo\n";
  ad::ParamStore best_params = model.params();
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0;

  const auto evaluate_split = [&](const data::Dataset& split, RngStream rng,
                                  losses::LossBreakdown& comps,
                                  std::vector<metrics::EvalRecord>& records) {
    ad::Tape tape;
    const auto out = model.forward(tape, split.x, rng);
    const auto total = losses::total(tape, out.task_logits, out.sens_logits, out.e_t, out.e_s,
                                     split.y, split.s, eff_w);
    comps = total.values;
    records = records_from_batch(tape.value(tape.softmax_rows(out.task_logits)), split.y,
                                 split.s);
  };

  try {
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      RngStream epoch_shuffle = shuffle_root.substream(epoch);
      shuffle(order, epoch_shuffle);

      losses::LossBreakdown sums{};
      std::vector<metrics::EvalRecord> train_records;
      train_records.reserve(n);

      for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t count = std::min(cfg.batch_size, n - begin);
        const Tensor xb = rows_subset(data.train.x, order, begin, count);
        const std::vector<int> yb = subset(data.train.y, order, begin, count);
        const std::vector<int> sb = subset(data.train.s, order, begin, count);

        ad::Tape tape;
        const auto out = model.forward(tape, xb, train_noise);
        const auto total = losses::total(tape, out.task_logits, out.sens_logits, out.e_t,
                                         out.e_s, yb, sb, eff_w);

        const auto& b = total.values;
        const double recombined =
            b.task_ce + eff_w.beta1 * b.sens_ce + eff_w.beta2 * b.orth + eff_w.beta3 * b.dp;
        if (std::fabs(tape.value(total.var).item() - recombined) > 1e-12) {
          throw NumericAbort("loss breakdown does not recombine to the total");
        }

        const ad::Gradients grads = tape.backward(total.var, model.params());
        opt.step(model.params(), grads);

        const double w = static_cast<double>(count);
        sums.task_ce += w * b.task_ce;
        sums.sens_ce += w * b.sens_ce;
        sums.orth += w * b.orth;
        sums.dp += w * b.dp;
        const auto batch_records =
            records_from_batch(tape.value(tape.softmax_rows(out.task_logits)), yb, sb);
        train_records.insert(train_records.end(), batch_records.begin(), batch_records.end());
      }

      losses::LossBreakdown means = sums;
      const double inv_n = 1.0 / static_cast<double>(n);
      means.task_ce *= inv_n;
      means.sens_ce *= inv_n;
      means.orth *= inv_n;
      means.dp *= inv_n;
      result.log_csv += log_row(epoch, "train", means, train_records);

      if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
        losses::LossBreakdown val_comps{};
        std::vector<metrics::EvalRecord> val_records;
        evaluate_split(data.val, noise_root.substream(epoch), val_comps, val_records);
        result.log_csv += log_row(epoch, "val", val_comps, val_records);

        const double val_acc = metric_or_nan(&metrics::accuracy, val_records);
        if (std::isfinite(val_acc) && val_acc > best_val_acc) {
          best_val_acc = val_acc;
          best_epoch = epoch;
          best_params = model.params();
        }
      }
    }
  } catch (const NumericAbort& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  }

  if (best_epoch == 0 && !result.aborted) {
    throw ValueError("training finished without a validation point");
  }
  result.best = model::Model::from_parts(eff_mcfg, best_epoch == 0 ? model.params()
                                                                   : std::move(best_params));
  result.best_epoch = best_epoch;
  result.best_val_acc = best_val_acc;
  return result;
}

std::vector<Toggles> full_toggle_grid() {
  std::vector<Toggles> grid;
  for (int fair = 0; fair < 2; ++fair) {
    for (int orth = 0; orth < 2; ++orth) {
      for (int noise = 0; noise < 2; ++noise) {
        grid.push_back(Toggles{fair != 0, orth != 0, noise != 0});
      }
    }
  }
  return grid;
}

const char* toggle_label(const Toggles& t) {
  static const char* names[8] = {
      "none", "noise", "orth", "orth+noise", "fair", "fair+noise", "fair+orth", "all",
  };
  return names[(t.fair ? 4 : 0) + (t.orth ? 2 : 0) + (t.noise ? 1 : 0)];
}

std::vector<AblationRow> run_ablation_grid(const model::ModelConfig& mcfg,
                                           const data::Splits& data, const TrainConfig& base,
                                           const std::vector<Toggles>& grid,
                                           const EvalOptions& eval, std::size_t jobs) {
  std::vector<AblationRow> rows(grid.size());
  const auto run_cell = [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.toggles = grid[i];
    const TrainResult r = fit(mcfg, data, cfg);
    if (r.aborted) throw NumericAbort("grid cell " + std::string(toggle_label(grid[i])) +
                                      " aborted: " + r.abort_reason);
    rows[i] = AblationRow{toggle_label(grid[i]), grid[i], infer::run_eval(r.best, data, eval)};
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_cell(i);
    return rows;
  }

  std::vector<std::thread> workers;
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::atomic<std::size_t> next{0};
  const std::size_t worker_count = std::min(jobs, grid.size());
  for (std::size_t w = 0; w < worker_count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= grid.size()) return;
        try {
          run_cell(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
  return rows;
}

}  // namespace fairnvt::train
