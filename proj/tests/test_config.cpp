#include <filesystem>
#include <string>

#include "doctest.h"
#include "fairnvt/config.hpp"
#include "fairnvt/errors.hpp"
#include "fairnvt/textio.hpp"

namespace config = fairnvt::config;
namespace fs = std::filesystem;

TEST_CASE("config reader parses key=value text with comments") {
  config::ConfigReader r = config::ConfigReader::from_string(
      "# a comment\n"
      "model.hidden_dim = 32\n"
      "\n"
      "noise.sigma=2.5   # trailing comment\n"
      "toggles.fair = off\n"
      "name = run-a\n",
      "inline");

  CHECK(r.get_int("model.hidden_dim", 0) == 32);
  CHECK(r.get_double("noise.sigma", 0.0) == 2.5);
  CHECK(r.get_bool("toggles.fair", true) == false);
  CHECK(r.get_string("name", "") == "run-a");
  CHECK(r.get_int("absent", 7) == 7);
  CHECK_FALSE(r.has("absent"));
  r.finish();
}

TEST_CASE("config reader rejects malformed input") {
  CHECK_THROWS_AS(config::ConfigReader::from_string("novalue\n", "inline"),
                  fairnvt::ConfigError);
  CHECK_THROWS_AS(config::ConfigReader::from_string("a=1\na=2\n", "inline"),
                  fairnvt::ConfigError);

  config::ConfigReader bad_int = config::ConfigReader::from_string("k=abc\n", "inline");
  CHECK_THROWS_AS(bad_int.get_int("k", 0), fairnvt::ConfigError);
  config::ConfigReader bad_bool = config::ConfigReader::from_string("k=maybe\n", "inline");
  CHECK_THROWS_AS(bad_bool.get_bool("k", true), fairnvt::ConfigError);

  config::ConfigReader unused = config::ConfigReader::from_string("k=1\n", "inline");
  CHECK_THROWS_AS(unused.finish(), fairnvt::ConfigError);
}

TEST_CASE("bool values accept the documented spellings") {
  config::ConfigReader r = config::ConfigReader::from_string(
      "a=true\nb=false\nc=on\nd=off\ne=1\nf=0\n", "inline");
  CHECK(r.get_bool("a", false));
  CHECK_FALSE(r.get_bool("b", true));
  CHECK(r.get_bool("c", false));
  CHECK_FALSE(r.get_bool("d", true));
  CHECK(r.get_bool("e", false));
  CHECK_FALSE(r.get_bool("f", true));
  r.finish();
}

TEST_CASE("train spec defaults and overrides") {
  const fs::path dir = fs::path(".") / "tmp_config_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string empty_path = (dir / "empty.cfg").string();
  fairnvt::textio::write_file(empty_path, "");
  const config::TrainSpec defaults = config::load_train_spec(empty_path);
  CHECK(defaults.model.encoder.hidden_dim == 16);
  CHECK(defaults.model.encoder.num_layers == 2);
  CHECK(defaults.model.task_reduction == 8);
  CHECK(defaults.model.sens_reduction == 16);
  CHECK(defaults.model.noise.sigma == 5.0);
  CHECK(defaults.model.noise.clip == 10.0);
  CHECK(defaults.train.weights.beta1 == 1.0);
  CHECK(defaults.train.weights.beta2 == 0.1);
  CHECK(defaults.train.weights.beta3 == 0.3);
  CHECK(defaults.train.adam.lr == 1e-3);
  CHECK(defaults.train.adam.weight_decay == 0.01);
  CHECK(defaults.train.batch_size == 256);
  CHECK(defaults.train.epochs == 20);
  CHECK(defaults.train.toggles.fair);
  CHECK(defaults.train.toggles.orth);
  CHECK(defaults.train.toggles.noise);
  CHECK_FALSE(defaults.has_seed);

  const std::string full_path = (dir / "full.cfg").string();
  fairnvt::textio::write_file(full_path,
                              "model.hidden_dim = 8\n"
                              "model.num_layers = 1\n"
                              "model.activation = relu\n"
                              "model.variant = concat_no_noise\n"
                              "model.task_reduction = 4\n"
                              "model.sens_reduction = 8\n"
                              "noise.sigma = 1.5\n"
                              "noise.clip = 2.0\n"
                              "loss.beta1 = 0.5\n"
                              "loss.beta2 = 0.0\n"
                              "loss.beta3 = 1.0\n"
                              "train.lr = 0.01\n"
                              "train.batch_size = 32\n"
                              "train.epochs = 3\n"
                              "train.seed = 9\n"
                              "toggles.noise = off\n");
  const config::TrainSpec spec = config::load_train_spec(full_path);
  CHECK(spec.model.encoder.hidden_dim == 8);
  CHECK(spec.model.encoder.num_layers == 1);
  CHECK(spec.model.encoder.activation == fairnvt::model::Activation::kRelu);
  CHECK(spec.model.variant == fairnvt::model::Variant::kConcatNoNoise);
  CHECK(spec.model.noise.sigma == 1.5);
  CHECK(spec.model.noise.clip == 2.0);
  CHECK(spec.train.weights.beta1 == 0.5);
  CHECK(spec.train.weights.beta2 == 0.0);
  CHECK(spec.train.adam.lr == 0.01);
  CHECK(spec.train.batch_size == 32);
  CHECK(spec.train.epochs == 3);
  CHECK(spec.train.seed == 9);
  CHECK(spec.has_seed);
  CHECK_FALSE(spec.train.toggles.noise);

  const std::string typo_path = (dir / "typo.cfg").string();
  fairnvt::textio::write_file(typo_path, "model.hiden_dim = 8\n");
  CHECK_THROWS_AS(config::load_train_spec(typo_path), fairnvt::ConfigError);

  const std::string bad_path = (dir / "bad.cfg").string();
  fairnvt::textio::write_file(bad_path, "train.epochs = -3\n");
  CHECK_THROWS_AS(config::load_train_spec(bad_path), fairnvt::ConfigError);

  CHECK_THROWS_AS(config::load_train_spec((dir / "missing.cfg").string()), fairnvt::Error);

  fs::remove_all(dir);
}
