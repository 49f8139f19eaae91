#pragma once

#include <cstdint>
#include <string>

#include "fairnvt/rng.hpp"
#include "fairnvt/tape.hpp"
#include "fairnvt/tensor.hpp"

namespace fairnvt::model {

enum class Activation { kTanh, kRelu };

// What the task classifier consumes:
//  kFairNVT        [e_t, stop_gradient(e_s_noised)]   (the full pipeline)
//  kBackboneOnly   frozen encoding h, no adapters
//  kConcatNoNoise  [e_s, e_t] with no clip, noise or gradient block
//  kPureNoiseConcat[z, e_t] with z drawn like the injection noise
enum class Variant { kFairNVT, kBackboneOnly, kConcatNoNoise, kPureNoiseConcat };

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 16;
  std::size_t num_layers = 2;
  Activation activation = Activation::kTanh;
  std::uint64_t init_seed = 0;
};

struct NoiseConfig {
  double sigma = 5.0;  // noise scale multiplier, >= 0; draws are N(0, clip^2 * sigma^2)
  double clip = 10.0;  // L2 clip bound, > 0
  bool enabled = true;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t task_classes = 2;
  std::size_t sens_classes = 2;
  std::size_t task_reduction = 8;
  std::size_t sens_reduction = 16;
  NoiseConfig noise;
  Variant variant = Variant::kFairNVT;
};

// Tape handles for one forward pass over a batch.
struct ForwardOutputs {
  ad::Var h;           // frozen encoding without adapters
  ad::Var e_t;         // task-adapter embedding
  ad::Var e_s;         // sensitive-adapter embedding (clean)
  ad::Var e_s_clip;    // l2_clip(e_s, clip)
  ad::Var e_s_noised;  // e_s_clip + z
  ad::Var e_f;         // task-head input for the active variant
  ad::Var task_logits;
  ad::Var sens_logits;
};

class Model {
 public:
  // Empty shell; only meaningful once assigned from init or from_parts.
  Model() = default;

  // Fresh parameters: frozen encoder plus zero-initialized-up adapters and
  // randomly initialized heads, all derived from the master seed.
  static Model init(ModelConfig cfg, std::uint64_t master_seed);

  // Rebuild from checkpoint records; validates the parameter set.
  static Model from_parts(ModelConfig cfg, ad::ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // One forward pass over a batch x [n x input_dim]. Draws fresh per-sample
  // noise from the stream whenever the effective sigma is positive; the draw
  // is a tape constant and is never differentiated through.
  ForwardOutputs forward(ad::Tape& tape, const Tensor& x, RngStream& noise_rng) const;

  // Width of e_f under the active variant.
  std::size_t fused_dim() const;

  // Effective noise scale: 0 when disabled, clip * sigma otherwise.
  double noise_stddev() const;

 private:
  ModelConfig cfg_;
  ad::ParamStore params_;
};

// Expected parameter names and shapes for a config; checkpoint loading and
// init both derive from this single description.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_params(
    const ModelConfig& cfg);

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Checkpoint serialization. Layout: one ASCII header line, then per-parameter
// records sorted by name (name, rank and dims as tab-separated text followed
// by a little-endian float-64 payload), then an 8-byte CRC-64 of all payload
// bytes. Model hyperparameters ride along as reserved meta.* records.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);
std::string checkpoint_bytes(const Model& m);
Model model_from_checkpoint_bytes(const std::string& bytes);

}  // namespace fairnvt::model
