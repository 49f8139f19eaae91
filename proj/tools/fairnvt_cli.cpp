#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairnvt/attacker.hpp"
#include "fairnvt/config.hpp"
#include "fairnvt/data.hpp"
#include "fairnvt/errors.hpp"
#include "fairnvt/infer.hpp"
#include "fairnvt/lemma.hpp"
#include "fairnvt/losses.hpp"
#include "fairnvt/metrics.hpp"
#include "fairnvt/model.hpp"
#include "fairnvt/textio.hpp"
#include "fairnvt/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitViolation = 4;

std::uint64_t env_fallback_seed() {
  if (const char* env = std::getenv("FAIRNVT_SEED")) {
    return static_cast<std::uint64_t>(
        fairnvt::textio::parse_int_strict(env, "FAIRNVT_SEED"));
  }
  return 1;
}

int infer_classes(const fairnvt::data::Splits& sp, bool sensitive) {
  int m = 0;
  for (const auto* d : {&sp.train, &sp.val, &sp.test}) {
    m = std::max(m, sensitive ? d->sens_classes() : d->task_classes());
  }
  return std::max(m, 2);
}

struct GridSpec {
  bool toggles = false;
  std::string param;            // sigma, clip, beta1, beta2, beta3, draws
  std::vector<double> values;
};

GridSpec parse_grid(const std::string& spec) {
  GridSpec g;
  if (spec == "toggles") {
    g.toggles = true;
    return g;
  }
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw fairnvt::ConfigError("grid must be 'toggles' or '<param>=v1,v2,...', got '" + spec +
                               "'");
  }
  g.param = spec.substr(0, eq);
  const std::vector<std::string> supported = {"sigma", "clip", "beta1", "beta2", "beta3",
                                              "draws"};
  if (std::find(supported.begin(), supported.end(), g.param) == supported.end()) {
    throw fairnvt::ConfigError("unsupported grid parameter '" + g.param + "'");
  }
  for (const auto& tok : fairnvt::textio::split(spec.substr(eq + 1), ',')) {
    g.values.push_back(fairnvt::textio::parse_double_strict(tok, "grid value"));
  }
  if (g.values.empty()) throw fairnvt::ConfigError("grid has no values");
  return g;
}

std::string report_csv_fields(const fairnvt::metrics::MetricsReport& r) {
  std::string out;
  for (double v : {r.acc, r.bacc, r.dp, r.eopp, r.eo, r.att_acc, r.balanced_att_acc}) {
    out += ',';
    out += fairnvt::textio::fmt_fixed(v, 4);
  }
  return out;
}

const char* onoff(bool v) { return v ? "on" : "off"; }

int run(int argc, char** argv) {
  using namespace fairnvt;

  CLI::App app{"FairNVT: adapter debiasing with calibrated noise injection"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic biased dataset");
  std::string gen_out;
  data::SynthConfig synth;
  long long gen_seed = -1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", synth.n_per_split, "samples per split");
  gen->add_option("--dim", synth.dim, "feature dimension");
  gen->add_option("--rho", synth.rho, "sensitive leakage strength in [0,1]");
  gen->add_option("--task-sep", synth.task_sep, "task class separation");
  gen->add_option("--base-y", synth.base_rate_y, "task positive rate");
  gen->add_option("--base-s", synth.base_rate_s, "sensitive positive rate");
  gen->add_option("--seed", gen_seed, "master seed");

  // train
  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string tr_config, tr_data, tr_out, tr_log;
  tr->add_option("--config", tr_config, "key=value config file")->required();
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--log", tr_log, "training log CSV path");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_report;
  std::size_t ev_draws = 1;
  long long ev_seed = -1;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--draws", ev_draws, "noise draws per sample");
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--report", ev_report, "report output path");

  // attack
  auto* at = app.add_subcommand("attack", "probe a checkpoint's embeddings for leakage");
  std::string at_ckpt, at_data;
  std::size_t at_depth = 1;
  long long at_seed = -1;
  at->add_option("--ckpt", at_ckpt, "checkpoint path")->required();
  at->add_option("--data", at_data, "dataset directory")->required();
  at->add_option("--hidden-layers", at_depth, "probe depth");
  at->add_option("--seed", at_seed, "attacker seed");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and evaluate a configuration grid");
  std::string ab_config, ab_data, ab_grid = "toggles", ab_out;
  std::size_t ab_jobs = 1;
  ab->add_option("--config", ab_config, "key=value config file")->required();
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--grid", ab_grid, "'toggles' or <param>=v1,v2,...");
  ab->add_option("--out", ab_out, "grid CSV output path")->required();
  ab->add_option("--jobs", ab_jobs, "concurrent cells");

  // verify-lemma
  auto* vl = app.add_subcommand("verify-lemma", "brute-force the independence lemma");
  std::size_t vl_trials = 1000;
  long long vl_seed = -1;
  std::string vl_csv;
  vl->add_option("--trials", vl_trials, "independent joints to test");
  vl->add_option("--seed", vl_seed, "trial seed");
  vl->add_option("--csv", vl_csv, "per-trial CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  const auto pick_seed = [](long long flag) {
    return flag >= 0 ? static_cast<std::uint64_t>(flag) : env_fallback_seed();
  };

  if (gen->parsed()) {
    synth.seed = pick_seed(gen_seed);
    const data::Splits sp = data::generate(synth);
    std::filesystem::create_directories(gen_out);
    data::save_splits(sp, gen_out);
    std::cout << "wrote " << gen_out << "/{train,val,test}.csv\n";
    return kExitOk;
  }

  if (tr->parsed()) {
    config::TrainSpec spec = config::load_train_spec(tr_config);
    const data::Splits sp = data::load_splits(tr_data);
    spec.model.encoder.input_dim = sp.train.dim();
    spec.model.task_classes = static_cast<std::size_t>(infer_classes(sp, false));
    spec.model.sens_classes = static_cast<std::size_t>(infer_classes(sp, true));
    if (!spec.has_seed) spec.train.seed = env_fallback_seed();

    const train::TrainResult result = train::fit(spec.model, sp, spec.train);
    model::save_checkpoint(result.best, tr_out);
    if (!tr_log.empty()) textio::write_file(tr_log, result.log_csv);
    if (result.aborted) {
      std::cerr << "training aborted: " << result.abort_reason
                << " (last good checkpoint written)\n";
      return kExitNumeric;
    }

    train::EvalOptions opts;
    opts.seed = spec.train.seed;
    opts.on_val = true;
    const metrics::MetricsReport report = infer::run_eval(result.best, sp, opts);
    std::cout << "best epoch " << result.best_epoch << "\n"
              << metrics::serialize_report(report);
    return kExitOk;
  }

  if (ev->parsed()) {
    const model::Model m = model::load_checkpoint(ev_ckpt);
    const data::Splits sp = data::load_splits(ev_data);
    train::EvalOptions opts;
    opts.draws = ev_draws;
    opts.seed = pick_seed(ev_seed);
    const metrics::MetricsReport report = infer::run_eval(m, sp, opts);
    const std::string text = metrics::serialize_report(report);
    if (!ev_report.empty()) textio::write_file(ev_report, text);
    std::cout << text;
    return kExitOk;
  }

  if (at->parsed()) {
    const model::Model m = model::load_checkpoint(at_ckpt);
    const data::Splits sp = data::load_splits(at_data);
    const std::uint64_t seed = pick_seed(at_seed);
    RngStream noise_root(seed, stream_id::kNoise);
    const infer::PredictResult test = infer::predict(m, sp.test, 1, noise_root.substream(0));
    const infer::PredictResult train_emb =
        infer::predict(m, sp.train, 1, noise_root.substream(1));

    attacker::AttackerConfig acfg;
    acfg.hidden_layers = at_depth;
    acfg.seed = seed;
    const attacker::AttackerResult probe =
        attacker::attack(train_emb.embeddings, sp.train.s, test.embeddings, sp.test.s, acfg);
    std::cout << "att_acc=" << textio::fmt_fixed(probe.att_acc, 4) << "\n"
              << "balanced_att_acc=" << textio::fmt_fixed(probe.balanced_att_acc, 4) << "\n";
    return kExitOk;
  }

  if (ab->parsed()) {
    const GridSpec grid = parse_grid(ab_grid);
    config::TrainSpec spec = config::load_train_spec(ab_config);
    const data::Splits sp = data::load_splits(ab_data);
    spec.model.encoder.input_dim = sp.train.dim();
    spec.model.task_classes = static_cast<std::size_t>(infer_classes(sp, false));
    spec.model.sens_classes = static_cast<std::size_t>(infer_classes(sp, true));
    if (!spec.has_seed) spec.train.seed = env_fallback_seed();

    train::EvalOptions eval;
    eval.seed = spec.train.seed;

    const std::string header =
        "cell,fair,orth,noise,sigma,clip,beta1,beta2,beta3,draws,"
        "acc,bacc,dp,eopp,eo,att_acc,balanced_att_acc\n";
    std::string csv = header;
    const auto config_fields = [&](const train::Toggles& t, double sigma, double clip,
                                   const losses::LossWeights& w, std::size_t draws) {
      std::string out;
      out += std::string(onoff(t.fair)) + "," + onoff(t.orth) + "," + onoff(t.noise);
      for (double v : {sigma, clip, w.beta1, w.beta2, w.beta3}) {
        out += ',';
        out += textio::fmt_g17(v);
      }
      out += ',';
      out += std::to_string(draws);
      return out;
    };

    if (grid.toggles) {
      const std::vector<train::Toggles> cells = train::full_toggle_grid();
      const std::vector<train::AblationRow> rows =
          train::run_ablation_grid(spec.model, sp, spec.train, cells, eval, ab_jobs);
      for (const auto& row : rows) {
        csv += row.label + "," +
               config_fields(row.toggles, spec.model.noise.sigma, spec.model.noise.clip,
                             spec.train.weights, eval.draws) +
               report_csv_fields(row.report) + "\n";
        textio::write_file(ab_out, csv);
      }
    } else if (grid.param == "draws") {
      const train::TrainResult r = train::fit(spec.model, sp, spec.train);
      if (r.aborted) throw NumericAbort(r.abort_reason);
      for (double v : grid.values) {
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw ConfigError("draws grid values must be positive integers");
        }
        train::EvalOptions cell_eval = eval;
        cell_eval.draws = static_cast<std::size_t>(v);
        const metrics::MetricsReport rep = infer::run_eval(r.best, sp, cell_eval);
        csv += "draws=" + std::to_string(cell_eval.draws) + "," +
               config_fields(spec.train.toggles, spec.model.noise.sigma, spec.model.noise.clip,
                             spec.train.weights, cell_eval.draws) +
               report_csv_fields(rep) + "\n";
        textio::write_file(ab_out, csv);
      }
    } else {
      for (double v : grid.values) {
        config::TrainSpec cell = spec;
        if (grid.param == "sigma") cell.model.noise.sigma = v;
        else if (grid.param == "clip") cell.model.noise.clip = v;
        else if (grid.param == "beta1") cell.train.weights.beta1 = v;
        else if (grid.param == "beta2") cell.train.weights.beta2 = v;
        else if (grid.param == "beta3") cell.train.weights.beta3 = v;
        const train::TrainResult r = train::fit(cell.model, sp, cell.train);
        if (r.aborted) throw NumericAbort(r.abort_reason);
        const metrics::MetricsReport rep = infer::run_eval(r.best, sp, eval);
        csv += grid.param + "=" + textio::fmt_g17(v) + "," +
               config_fields(cell.train.toggles, cell.model.noise.sigma, cell.model.noise.clip,
                             cell.train.weights, eval.draws) +
               report_csv_fields(rep) + "\n";
        textio::write_file(ab_out, csv);
      }
    }
    std::cout << "wrote " << ab_out << "\n";
    return kExitOk;
  }

  if (vl->parsed()) {
    const lemma::LemmaReport report = lemma::verify_lemma(vl_trials, pick_seed(vl_seed));
    if (!vl_csv.empty()) textio::write_file(vl_csv, report.trials_csv);
    std::cout << report.summary;
    return report.passed() ? kExitOk : kExitViolation;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fairnvt::NumericAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fairnvt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
