#include "fairnvt/model.hpp"

#include <cstdio>

#include "fairnvt/errors.hpp"

namespace fairnvt::model {

namespace {

std::string layer_tag(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02zu", i);
  return buf;
}

std::size_t bottleneck_dim(const ModelConfig& cfg, std::size_t reduction, const char* which) {
  if (reduction == 0) throw ConfigError(std::string(which) + " reduction must be positive");
  const std::size_t d = cfg.encoder.hidden_dim;
  if (d % reduction != 0 || d / reduction == 0) {
    throw ConfigError(std::string(which) + " reduction " + std::to_string(reduction) +
                      " does not divide hidden dim " + std::to_string(d));
  }
  return d / reduction;
}

void append_head(std::vector<std::pair<std::string, std::vector<std::size_t>>>& out,
                 const std::string& prefix, std::size_t in_dim, std::size_t classes) {
  out.emplace_back(prefix + ".hidden.weight", std::vector<std::size_t>{in_dim, in_dim});
  out.emplace_back(prefix + ".hidden.bias", std::vector<std::size_t>{in_dim});
  out.emplace_back(prefix + ".out.weight", std::vector<std::size_t>{in_dim, classes});
  out.emplace_back(prefix + ".out.bias", std::vector<std::size_t>{classes});
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.encoder.input_dim == 0 || cfg.encoder.hidden_dim == 0 || cfg.encoder.num_layers == 0) {
    throw ConfigError("encoder dimensions and layer count must be positive");
  }
  if (cfg.encoder.num_layers > 99) throw ConfigError("encoder layer count above 99");
  if (cfg.task_classes < 2 || cfg.sens_classes < 2) {
    throw ConfigError("task and sensitive class counts must be at least 2");
  }
  if (!(cfg.noise.clip > 0.0)) throw ConfigError("noise.clip must be positive");
  if (cfg.noise.sigma < 0.0) throw ConfigError("noise.sigma must be non-negative");
  bottleneck_dim(cfg, cfg.task_reduction, "task");
  bottleneck_dim(cfg, cfg.sens_reduction, "sensitive");
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFairNVT: return "fairnvt";
    case Variant::kBackboneOnly: return "backbone_only";
    case Variant::kConcatNoNoise: return "concat_no_noise";
    case Variant::kPureNoiseConcat: return "pure_noise_concat";
  }
  throw ConfigError("unknown variant code");
}

Variant variant_from_name(const std::string& name) {
  if (name == "fairnvt") return Variant::kFairNVT;
  if (name == "backbone_only") return Variant::kBackboneOnly;
  if (name == "concat_no_noise") return Variant::kConcatNoNoise;
  if (name == "pure_noise_concat") return Variant::kPureNoiseConcat;
  throw ConfigError("unknown variant '" + name + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  throw ConfigError("unknown activation code");
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_params(
    const ModelConfig& cfg) {
  validate_config(cfg);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  const std::size_t d = cfg.encoder.hidden_dim;
  for (std::size_t l = 0; l < cfg.encoder.num_layers; ++l) {
    const std::size_t in = l == 0 ? cfg.encoder.input_dim : d;
    const std::string tag = layer_tag(l);
    out.emplace_back("encoder.layer" + tag + ".weight", std::vector<std::size_t>{in, d});
    out.emplace_back("encoder.layer" + tag + ".bias", std::vector<std::size_t>{d});
    for (const char* branch : {"task", "sens"}) {
      const std::size_t r = branch[0] == 't' ? cfg.task_reduction : cfg.sens_reduction;
      const std::size_t bd = bottleneck_dim(cfg, r, branch);
      const std::string p = std::string("adapter.") + branch + ".layer" + tag;
      out.emplace_back(p + ".down.weight", std::vector<std::size_t>{d, bd});
      out.emplace_back(p + ".down.bias", std::vector<std::size_t>{bd});
      out.emplace_back(p + ".up.weight", std::vector<std::size_t>{bd, d});
      out.emplace_back(p + ".up.bias", std::vector<std::size_t>{d});
    }
  }
  const std::size_t fused =
      cfg.variant == Variant::kBackboneOnly ? d : 2 * d;
  append_head(out, "head.task", fused, cfg.task_classes);
  append_head(out, "head.sens", d, cfg.sens_classes);
  return out;
}

Model Model::init(ModelConfig cfg, std::uint64_t master_seed) {
  validate_config(cfg);
  cfg.encoder.init_seed = master_seed;
  RngStream root(master_seed, stream_id::kParamInit);
  RngStream enc = root.substream(0);
  RngStream task_ad = root.substream(1);
  RngStream sens_ad = root.substream(2);
  RngStream task_head = root.substream(3);
  RngStream sens_head = root.substream(4);

  Model m;
  m.cfg_ = cfg;

  const auto scaled_gaussian = [](Tensor& t, std::size_t fan_in, RngStream& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.next_gaussian();
  };

  for (const auto& [name, shape] : expected_params(cfg)) {
    Tensor t(shape);
    const bool frozen = name.rfind("encoder.", 0) == 0;
    const bool zero_init =
        name.find(".up.") != std::string::npos || name.ends_with(".bias");
    if (!zero_init) {
      RngStream* rng = &enc;
      if (name.rfind("adapter.task.", 0) == 0) rng = &task_ad;
      else if (name.rfind("adapter.sens.", 0) == 0) rng = &sens_ad;
      else if (name.rfind("head.task.", 0) == 0) rng = &task_head;
      else if (name.rfind("head.sens.", 0) == 0) rng = &sens_head;
      scaled_gaussian(t, shape[0], *rng);
    }
    m.params_.add(name, std::move(t), !frozen);
  }
  return m;
}

Model Model::from_parts(ModelConfig cfg, ad::ParamStore params) {
  validate_config(cfg);
  const auto expected = expected_params(cfg);
  if (params.size() != expected.size()) {
    throw FormatError("checkpoint parameter count " + std::to_string(params.size()) +
                      " does not match the expected " + std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    if (!params.contains(name)) {
      throw FormatError("checkpoint is missing parameter '" + name + "'");
    }
    if (params.value(name).shape() != shape) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " +
                        params.value(name).shape_str() + ", expected " +
                        Tensor(shape).shape_str());
    }
    const bool frozen = name.rfind("encoder.", 0) == 0;
    if (params.trainable(name) == frozen) {
      throw FormatError("checkpoint parameter '" + name + "' has the wrong trainability");
    }
  }
  Model m;
  m.cfg_ = std::move(cfg);
  m.params_ = std::move(params);
  return m;
}

std::size_t Model::fused_dim() const {
  return cfg_.variant == Variant::kBackboneOnly ? cfg_.encoder.hidden_dim
                                                : 2 * cfg_.encoder.hidden_dim;
}

double Model::noise_stddev() const {
  if (!cfg_.noise.enabled) return 0.0;
  return cfg_.noise.clip * cfg_.noise.sigma;
}

ForwardOutputs Model::forward(ad::Tape& tape, const Tensor& x, RngStream& noise_rng) const {
  if (x.rank() != 2 || x.shape()[1] != cfg_.encoder.input_dim) {
    throw ShapeError("forward expects [n x " + std::to_string(cfg_.encoder.input_dim) +
                     "] input, got " + x.shape_str());
  }
  const std::size_t n = x.shape()[0];
  const std::size_t d = cfg_.encoder.hidden_dim;
  const bool backbone = cfg_.variant == Variant::kBackboneOnly;

  // The encoder nonlinearity is configurable; adapters and heads always use
  // tanh.
  const auto enc_act = [&](ad::Var v) {
    return cfg_.encoder.activation == Activation::kTanh ? tape.tanh(v) : tape.relu(v);
  };

  ad::Var input = tape.constant(x);
  ad::Var h = input;    // frozen path
  ad::Var ht = input;   // task branch
  ad::Var hs = input;   // sensitive branch

  for (std::size_t l = 0; l < cfg_.encoder.num_layers; ++l) {
    const std::string tag = layer_tag(l);
    ad::Var w = tape.leaf(params_, "encoder.layer" + tag + ".weight");
    ad::Var b = tape.leaf(params_, "encoder.layer" + tag + ".bias");

    h = enc_act(tape.add_bias(tape.matmul(h, w), b));
    if (backbone) continue;
    ht = enc_act(tape.add_bias(tape.matmul(ht, w), b));
    hs = enc_act(tape.add_bias(tape.matmul(hs, w), b));

    const auto adapter = [&](ad::Var v, const char* branch) {
      const std::string p = std::string("adapter.") + branch + ".layer" + tag;
      ad::Var down = tape.add_bias(tape.matmul(v, tape.leaf(params_, p + ".down.weight")),
                                   tape.leaf(params_, p + ".down.bias"));
      ad::Var up =
          tape.add_bias(tape.matmul(tape.tanh(down), tape.leaf(params_, p + ".up.weight")),
                        tape.leaf(params_, p + ".up.bias"));
      return tape.add(v, up);
    };
    ht = adapter(ht, "task");
    hs = adapter(hs, "sens");
  }

  ForwardOutputs out;
  out.h = h;
  out.e_t = backbone ? h : ht;
  out.e_s = backbone ? h : hs;
  out.e_s_clip = tape.l2_clip(out.e_s, cfg_.noise.clip);

  const double stddev = noise_stddev();
  ad::Var z{-1};
  if (stddev > 0.0) {
    Tensor zt({n, d});
    fill_gaussian(zt, stddev, noise_rng);
    z = tape.constant(std::move(zt));
    out.e_s_noised = tape.add(out.e_s_clip, z);
  } else {
    out.e_s_noised = out.e_s_clip;
  }

  switch (cfg_.variant) {
    case Variant::kFairNVT:
      out.e_f = tape.concat(out.e_t, tape.stop_gradient(out.e_s_noised));
      break;
    case Variant::kBackboneOnly:
      out.e_f = h;
      break;
    case Variant::kConcatNoNoise:
      out.e_f = tape.concat(out.e_s, out.e_t);
      break;
    case Variant::kPureNoiseConcat: {
      if (z.id < 0) z = tape.constant(Tensor({n, d}));
      out.e_f = tape.concat(z, out.e_t);
      break;
    }
  }

  const auto head = [&](const std::string& prefix, ad::Var in) {
    ad::Var hid = tape.tanh(
        tape.add_bias(tape.matmul(in, tape.leaf(params_, prefix + ".hidden.weight")),
                      tape.leaf(params_, prefix + ".hidden.bias")));
    return tape.add_bias(tape.matmul(hid, tape.leaf(params_, prefix + ".out.weight")),
                         tape.leaf(params_, prefix + ".out.bias"));
  };
  out.task_logits = head("head.task", out.e_f);
  out.sens_logits = head("head.sens", out.e_s);
  return out;
}

}  // namespace fairnvt::model
