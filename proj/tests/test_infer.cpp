#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "fairnvt/data.hpp"
#include "fairnvt/errors.hpp"
#include "fairnvt/infer.hpp"
#include "fairnvt/model.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/tape.hpp"
#include "fairnvt/textio.hpp"

using fairnvt::RngStream;
using fairnvt::Tensor;
namespace data = fairnvt::data;
namespace infer = fairnvt::infer;
namespace model = fairnvt::model;
namespace stream_id = fairnvt::stream_id;

namespace {

model::ModelConfig small_model() {
  model::ModelConfig cfg;
  cfg.encoder.input_dim = 8;
  cfg.encoder.hidden_dim = 16;
  cfg.encoder.num_layers = 1;
  return cfg;
}

data::Splits small_data(std::uint64_t seed) {
  data::SynthConfig cfg;
  cfg.n_per_split = 128;
  cfg.dim = 8;
  cfg.seed = seed;
  return data::generate(cfg);
}

bool same_records(const std::vector<fairnvt::metrics::EvalRecord>& a,
                  const std::vector<fairnvt::metrics::EvalRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].y_true != b[i].y_true || a[i].y_pred != b[i].y_pred || a[i].s != b[i].s ||
        a[i].probs != b[i].probs) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("a single draw reproduces the plain forward pass bit-exactly") {
  const model::Model m = model::Model::init(small_model(), 3);
  const data::Splits splits = small_data(3);
  const data::Dataset& d = splits.test;

  RngStream noise(3, stream_id::kNoise);
  const infer::PredictResult got = infer::predict(m, d, 1, noise.substream(0));

  // Manual single pass over the same stream.
  fairnvt::ad::Tape tape;
  RngStream manual_noise = noise.substream(0);
  const model::ForwardOutputs out = m.forward(tape, d.x, manual_noise);
  const Tensor probs = tape.value(tape.softmax_rows(out.task_logits));
  const Tensor& e_f = tape.value(out.e_f);

  REQUIRE(got.records.size() == d.size());
  REQUIRE(got.embeddings.shape() == e_f.shape());
  for (std::size_t i = 0; i < d.size(); ++i) {
    int argmax = 0;
    for (std::size_t k = 1; k < probs.cols(); ++k) {
      if (probs.at(i, k) > probs.at(i, argmax)) argmax = static_cast<int>(k);
    }
    CHECK(got.records[i].y_pred == argmax);
    CHECK(got.records[i].y_true == d.y[i]);
    CHECK(got.records[i].s == d.s[i]);
    for (std::size_t k = 0; k < probs.cols(); ++k) {
      CHECK(got.records[i].probs[k] == probs.at(i, k));
    }
  }
  for (std::size_t i = 0; i < e_f.size(); ++i) CHECK(got.embeddings[i] == e_f[i]);
}

TEST_CASE("disabled noise makes every draw count identical") {
  model::ModelConfig cfg = small_model();
  cfg.noise.enabled = false;
  const model::Model m = model::Model::init(cfg, 5);
  const data::Splits splits = small_data(5);

  RngStream noise(5, stream_id::kNoise);
  const infer::PredictResult one = infer::predict(m, splits.test, 1, noise.substream(0));
  const infer::PredictResult four = infer::predict(m, splits.test, 4, noise.substream(0));
  const infer::PredictResult nine = infer::predict(m, splits.test, 9, noise.substream(0));
  CHECK(same_records(one.records, four.records));
  CHECK(same_records(one.records, nine.records));
}

TEST_CASE("predict is deterministic in its inputs") {
  const model::Model m = model::Model::init(small_model(), 7);
  const data::Splits splits = small_data(7);
  RngStream noise(7, stream_id::kNoise);
  const infer::PredictResult a = infer::predict(m, splits.test, 5, noise.substream(0));
  const infer::PredictResult b = infer::predict(m, splits.test, 5, noise.substream(0));
  CHECK(same_records(a.records, b.records));
  for (std::size_t i = 0; i < a.embeddings.size(); ++i) {
    CHECK(a.embeddings[i] == b.embeddings[i]);
  }
}

TEST_CASE("majority vote matches an independent replay, ties included") {
  // Large sigma so draws disagree and even-k ties actually occur.
  model::ModelConfig cfg = small_model();
  cfg.noise.sigma = 20.0;
  const model::Model m = model::Model::init(cfg, 9);
  const data::Splits splits = small_data(9);
  const data::Dataset& d = splits.test;
  const std::size_t n = d.size();

  for (const std::size_t k : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
    RngStream noise(9, stream_id::kNoise);
    const infer::PredictResult got = infer::predict(m, d, k, noise.substream(0));

    RngStream replay = noise.substream(0);
    std::vector<std::vector<int>> votes(n, std::vector<int>(2, 0));
    std::vector<std::vector<double>> prob_sum(n, std::vector<double>(2, 0.0));
    for (std::size_t draw = 0; draw < k; ++draw) {
      fairnvt::ad::Tape tape;
      const model::ForwardOutputs out = m.forward(tape, d.x, replay);
      const Tensor probs = tape.value(tape.softmax_rows(out.task_logits));
      for (std::size_t i = 0; i < n; ++i) {
        const int pred = probs.at(i, 1) > probs.at(i, 0) ? 1 : 0;
        ++votes[i][static_cast<std::size_t>(pred)];
        prob_sum[i][0] += probs.at(i, 0);
        prob_sum[i][1] += probs.at(i, 1);
      }
    }

    std::size_t ties = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int expect;
      if (votes[i][0] != votes[i][1]) {
        expect = votes[i][1] > votes[i][0] ? 1 : 0;
      } else {
        ++ties;
        expect = prob_sum[i][1] > prob_sum[i][0] ? 1 : 0;
      }
      CHECK(got.records[i].y_pred == expect);
      CHECK(got.records[i].probs[0] ==
            prob_sum[i][0] / static_cast<double>(k));
      CHECK(got.records[i].probs[1] ==
            prob_sum[i][1] / static_cast<double>(k));
    }
    if (k % 2 == 0) CHECK(ties > 0);
  }
}

TEST_CASE("predict validates sizes") {
  const model::Model m = model::Model::init(small_model(), 11);
  const data::Splits splits = small_data(11);
  RngStream noise(11, stream_id::kNoise);
  CHECK_THROWS_AS(infer::predict(m, splits.test, 0, noise.substream(0)),
                  fairnvt::ConfigError);

  data::SynthConfig narrow;
  narrow.n_per_split = 16;
  narrow.dim = 5;
  const data::Splits bad = data::generate(narrow);
  CHECK_THROWS_AS(infer::predict(m, bad.test, 1, noise.substream(0)), fairnvt::ShapeError);
}

TEST_CASE("fused embeddings keep the 2d width under the full pipeline") {
  const model::Model m = model::Model::init(small_model(), 13);
  const data::Splits splits = small_data(13);
  RngStream noise(13, stream_id::kNoise);
  const infer::PredictResult r = infer::predict(m, splits.test, 1, noise.substream(0));
  CHECK(r.embeddings.shape() == std::vector<std::size_t>{splits.test.size(), 32});
}

TEST_CASE("a constant-prediction model has zero fairness gaps") {
  model::Model m = model::Model::init(small_model(), 15);
  Tensor w = m.params().value("head.task.out.weight");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
  m.params().value("head.task.out.weight") = w;
  m.params().value("head.task.out.bias") = Tensor({2}, {0.0, 5.0});

  const data::Splits splits = small_data(15);
  fairnvt::train::EvalOptions opts;
  opts.seed = 15;
  const fairnvt::metrics::MetricsReport report = infer::run_eval(m, splits, opts);

  CHECK(report.dp == 0.0);
  CHECK(report.eopp == 0.0);
  CHECK(report.eo == 0.0);

  std::size_t positives = 0;
  for (int y : splits.test.y) positives += y == 1 ? 1 : 0;
  const double base = 100.0 * static_cast<double>(positives) /
                      static_cast<double>(splits.test.size());
  CHECK(report.acc == doctest::Approx(base).epsilon(1e-12));
  CHECK(report.att_acc >= 0.0);
  CHECK(report.att_acc <= 100.0);
}

TEST_CASE("prediction dumps follow the csv contract") {
  const model::Model m = model::Model::init(small_model(), 17);
  data::SynthConfig dcfg;
  dcfg.n_per_split = 4;
  dcfg.dim = 8;
  dcfg.seed = 17;
  const data::Splits splits = data::generate(dcfg);
  RngStream noise(17, stream_id::kNoise);
  const infer::PredictResult r = infer::predict(m, splits.test, 2, noise.substream(0));

  const std::string csv = infer::predictions_csv(splits.test, r);
  const std::vector<std::string> lines = fairnvt::textio::split(csv, '\n');
  REQUIRE(lines.size() >= 5);
  CHECK(lines[0] == "id,y_true,s,y_pred,p_0,p_1");
  const std::vector<std::string> row = fairnvt::textio::split(lines[1], ',');
  REQUIRE(row.size() == 6);
  CHECK(row[0] == splits.test.id[0]);
  CHECK(row[1] == std::to_string(splits.test.y[0]));

  // The dumped probabilities parse back to the record values.
  const double p0 = fairnvt::textio::parse_double_strict(row[4], "p_0");
  CHECK(p0 == r.records[0].probs[0]);
}
