#include "fairnvt/config.hpp"

#include "fairnvt/errors.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::config {

ConfigReader ConfigReader::from_string(const std::string& text, const std::string& origin) {
  ConfigReader r;
  r.origin_ = origin;
  const auto lines = textio::split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(origin + ":" + std::to_string(i + 1) + ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    if (const auto key_end = key.find_last_not_of(" \t"); key_end != std::string::npos) {
      key.resize(key_end + 1);
    }
    std::string value = line.substr(eq + 1);
    if (const auto v_first = value.find_first_not_of(" \t"); v_first != std::string::npos) {
      value = value.substr(v_first);
    } else {
      value.clear();
    }
    if (!r.values_.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(i + 1) + ": duplicate key '" + key + "'");
    }
  }
  return r;
}

ConfigReader ConfigReader::from_file(const std::string& path) {
  return from_string(textio::read_file(path), path);
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return textio::parse_double_strict(it->second, origin_ + ": key " + key);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

long long ConfigReader::get_int(const std::string& key, long long fallback) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return textio::parse_int_strict(it->second, origin_ + ": key " + key);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(origin_ + ": key " + key + " must be on/off, true/false or 0/1, got '" +
                    v + "'");
}

void ConfigReader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += key;
  }
  if (!unknown.empty()) {
    throw ConfigError(origin_ + ": unknown keys: " + unknown);
  }
}

TrainSpec load_train_spec(const std::string& path) {
  ConfigReader r = ConfigReader::from_file(path);
  TrainSpec spec;

  const auto positive_size = [&](const std::string& key, std::size_t fallback) {
    const long long v = r.get_int(key, static_cast<long long>(fallback));
    if (v < 1) throw ConfigError(path + ": key " + key + " must be positive");
    return static_cast<std::size_t>(v);
  };

  spec.model.encoder.hidden_dim = positive_size("model.hidden_dim", 16);
  spec.model.encoder.num_layers = positive_size("model.num_layers", 2);
  spec.model.encoder.activation =
      model::activation_from_name(r.get_string("model.activation", "tanh"));
  spec.model.task_reduction = positive_size("model.task_reduction", 8);
  spec.model.sens_reduction = positive_size("model.sens_reduction", 16);
  spec.model.variant = model::variant_from_name(r.get_string("model.variant", "fairnvt"));

  spec.model.noise.sigma = r.get_double("noise.sigma", 5.0);
  spec.model.noise.clip = r.get_double("noise.clip", 10.0);
  spec.model.noise.enabled = true;

  spec.train.weights.beta1 = r.get_double("loss.beta1", 1.0);
  spec.train.weights.beta2 = r.get_double("loss.beta2", 0.1);
  spec.train.weights.beta3 = r.get_double("loss.beta3", 0.3);

  spec.train.adam.lr = r.get_double("train.lr", 1e-3);
  spec.train.adam.beta1 = r.get_double("train.adam_beta1", 0.9);
  spec.train.adam.beta2 = r.get_double("train.adam_beta2", 0.999);
  spec.train.adam.eps = r.get_double("train.adam_eps", 1e-8);
  spec.train.adam.weight_decay = r.get_double("train.weight_decay", 0.01);
  spec.train.batch_size = positive_size("train.batch_size", 256);
  spec.train.epochs = positive_size("train.epochs", 20);
  spec.train.eval_every = positive_size("train.eval_every", 1);
  spec.has_seed = r.has("train.seed");
  spec.train.seed = static_cast<std::uint64_t>(r.get_int("train.seed", 1));

  spec.train.toggles.fair = r.get_bool("toggles.fair", true);
  spec.train.toggles.orth = r.get_bool("toggles.orth", true);
  spec.train.toggles.noise = r.get_bool("toggles.noise", true);

  r.finish();
  return spec;
}

}  // namespace fairnvt::config
