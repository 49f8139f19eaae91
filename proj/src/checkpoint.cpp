#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <utility>

#include "fairnvt/errors.hpp"
#include "fairnvt/model.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::model {

namespace {

constexpr char kHeaderPrefix[] = "FAIRNVT-CKPT ";
constexpr char kHeaderVersion[] = "v1";
constexpr std::size_t kMaxRecordValues = 100'000'000;

// CRC-64/XZ: reflected 0x42F0E1EBA9EA3693, init and xorout all-ones.
const std::array<std::uint64_t, 256>& crc64_table() {
  static const std::array<std::uint64_t, 256> table = [] {
    std::array<std::uint64_t, 256> t{};
    for (std::uint64_t i = 0; i < 256; ++i) {
      std::uint64_t c = i;
      for (int k = 0; k < 8; ++k) c = (c >> 1) ^ ((c & 1) ? 0xC96C5795D7870F42ull : 0);
      t[i] = c;
    }
    return t;
  }();
  return table;
}

class Crc64 {
 public:
  void update(const char* data, std::size_t len) {
    const auto& t = crc64_table();
    for (std::size_t i = 0; i < len; ++i) {
      crc_ = t[(crc_ ^ static_cast<unsigned char>(data[i])) & 0xFF] ^ (crc_ >> 8);
    }
  }
  std::uint64_t value() const { return crc_ ^ 0xFFFFFFFFFFFFFFFFull; }

 private:
  std::uint64_t crc_ = 0xFFFFFFFFFFFFFFFFull;
};

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_record(std::string& out, Crc64& crc, const std::string& name, const Tensor& t) {
  out += name;
  out += '\t';
  out += std::to_string(t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) {
    out += '\t';
    out += std::to_string(t.shape()[i]);
  }
  out += '\t';
  const std::size_t start = out.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    append_u64_le(out, std::bit_cast<std::uint64_t>(t[i]));
  }
  crc.update(out.data() + start, out.size() - start);
}

struct MetaEntry {
  const char* name;
  double value;
};

std::vector<MetaEntry> meta_entries(const ModelConfig& cfg) {
  const auto& e = cfg.encoder;
  return {
      {"meta.activation", static_cast<double>(static_cast<int>(e.activation))},
      {"meta.hidden_dim", static_cast<double>(e.hidden_dim)},
      {"meta.input_dim", static_cast<double>(e.input_dim)},
      {"meta.noise.clip", cfg.noise.clip},
      {"meta.noise.enabled", cfg.noise.enabled ? 1.0 : 0.0},
      {"meta.noise.sigma", cfg.noise.sigma},
      {"meta.num_layers", static_cast<double>(e.num_layers)},
      {"meta.seed_hi", static_cast<double>(e.init_seed >> 32)},
      {"meta.seed_lo", static_cast<double>(e.init_seed & 0xFFFFFFFFull)},
      {"meta.sens_classes", static_cast<double>(cfg.sens_classes)},
      {"meta.sens_reduction", static_cast<double>(cfg.sens_reduction)},
      {"meta.task_classes", static_cast<double>(cfg.task_classes)},
      {"meta.task_reduction", static_cast<double>(cfg.task_reduction)},
      {"meta.variant", static_cast<double>(static_cast<int>(cfg.variant))},
  };
}

std::size_t require_index(const std::map<std::string, double>& meta, const std::string& key,
                          std::size_t limit) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint is missing the " + key + " record");
  const double v = it->second;
  if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)) ||
      static_cast<std::size_t>(v) >= limit) {
    throw FormatError("checkpoint record " + key + " has an invalid value");
  }
  return static_cast<std::size_t>(v);
}

double require_value(const std::map<std::string, double>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint is missing the " + key + " record");
  return it->second;
}

}  // namespace

std::string checkpoint_bytes(const Model& m) {
  std::vector<std::pair<std::string, Tensor>> records;
  for (const auto& name : m.params().names()) {
    records.emplace_back(name, m.params().value(name));
  }
  for (const auto& me : meta_entries(m.config())) {
    records.emplace_back(me.name, Tensor({1}, {me.value}));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string out;
  out += kHeaderPrefix;
  out += kHeaderVersion;
  out += '\n';
  Crc64 crc;
  for (const auto& [name, tensor] : records) append_record(out, crc, name, tensor);
  append_u64_le(out, crc.value());
  return out;
}

Model model_from_checkpoint_bytes(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("checkpoint has no header line");
  const std::string header = bytes.substr(0, nl);
  const std::string expected = std::string(kHeaderPrefix) + kHeaderVersion;
  if (header != expected) {
    if (header.rfind(kHeaderPrefix, 0) == 0) {
      throw VersionError("unsupported checkpoint version '" + header.substr(sizeof(kHeaderPrefix) - 1) +
                         "', expected '" + kHeaderVersion + "'");
    }
    throw FormatError("not a checkpoint: bad header line");
  }

  std::size_t pos = nl + 1;
  if (bytes.size() < pos + 8) throw FormatError("checkpoint truncated before the trailing CRC");
  const std::size_t end = bytes.size() - 8;

  ad::ParamStore params;
  std::map<std::string, double> meta;
  std::string prev_name;
  Crc64 crc;

  while (pos < end) {
    const std::size_t name_end = bytes.find('\t', pos);
    if (name_end == std::string::npos || name_end >= end) {
      throw FormatError("checkpoint truncated inside a record name");
    }
    const std::string name = bytes.substr(pos, name_end - pos);
    if (name.empty()) throw FormatError("checkpoint record has an empty name");
    if (!prev_name.empty() && !(prev_name < name)) {
      throw FormatError("checkpoint records out of lexicographic order at '" + name + "'");
    }
    prev_name = name;
    pos = name_end + 1;

    const auto next_field = [&](const char* what) {
      const std::size_t f_end = bytes.find('\t', pos);
      if (f_end == std::string::npos || f_end > end) {
        throw FormatError("checkpoint truncated inside the " + std::string(what) + " of '" + name + "'");
      }
      std::string field = bytes.substr(pos, f_end - pos);
      pos = f_end + 1;
      return field;
    };

    const long long rank =
        textio::parse_int_strict(next_field("rank"), "checkpoint record '" + name + "'");
    if (rank < 1 || rank > 2) {
      throw FormatError("checkpoint record '" + name + "' has unsupported rank " +
                        std::to_string(rank));
    }
    std::vector<std::size_t> dims;
    std::size_t count = 1;
    for (long long i = 0; i < rank; ++i) {
      const long long d =
          textio::parse_int_strict(next_field("dims"), "checkpoint record '" + name + "'");
      if (d < 1 || static_cast<std::size_t>(d) > kMaxRecordValues) {
        throw FormatError("checkpoint record '" + name + "' has an invalid dimension");
      }
      dims.push_back(static_cast<std::size_t>(d));
      count *= static_cast<std::size_t>(d);
      if (count > kMaxRecordValues) {
        throw FormatError("checkpoint record '" + name + "' is implausibly large");
      }
    }

    if (end - pos < count * 8) {
      throw FormatError("checkpoint truncated inside the payload of '" + name + "'");
    }
    crc.update(bytes.data() + pos, count * 8);
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      values[i] = std::bit_cast<double>(read_u64_le(bytes.data() + pos + i * 8));
    }
    pos += count * 8;

    if (name.rfind("meta.", 0) == 0) {
      if (rank != 1 || count != 1) {
        throw FormatError("checkpoint record '" + name + "' must hold a single value");
      }
      meta[name] = values[0];
    } else {
      const bool frozen = name.rfind("encoder.", 0) == 0;
      try {
        params.add(name, Tensor(dims, values), !frozen);
      } catch (const ValueError&) {
        throw FormatError("checkpoint record '" + name + "' holds non-finite values");
      }
    }
  }

  if (crc.value() != read_u64_le(bytes.data() + end)) {
    throw FormatError("checkpoint payload CRC mismatch");
  }

  ModelConfig cfg;
  cfg.encoder.input_dim = require_index(meta, "meta.input_dim", kMaxRecordValues);
  cfg.encoder.hidden_dim = require_index(meta, "meta.hidden_dim", kMaxRecordValues);
  cfg.encoder.num_layers = require_index(meta, "meta.num_layers", 100);
  cfg.encoder.activation = static_cast<Activation>(require_index(meta, "meta.activation", 2));
  cfg.encoder.init_seed = (static_cast<std::uint64_t>(require_index(meta, "meta.seed_hi", 1ull << 32)) << 32) |
                          static_cast<std::uint64_t>(require_index(meta, "meta.seed_lo", 1ull << 32));
  cfg.task_classes = require_index(meta, "meta.task_classes", kMaxRecordValues);
  cfg.sens_classes = require_index(meta, "meta.sens_classes", kMaxRecordValues);
  cfg.task_reduction = require_index(meta, "meta.task_reduction", kMaxRecordValues);
  cfg.sens_reduction = require_index(meta, "meta.sens_reduction", kMaxRecordValues);
  cfg.noise.sigma = require_value(meta, "meta.noise.sigma");
  cfg.noise.clip = require_value(meta, "meta.noise.clip");
  cfg.noise.enabled = require_value(meta, "meta.noise.enabled") != 0.0;
  cfg.variant = static_cast<Variant>(require_index(meta, "meta.variant", 4));
  if (meta.size() != meta_entries(cfg).size()) {
    throw FormatError("checkpoint carries unrecognized meta records");
  }

  try {
    return Model::from_parts(cfg, std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
}

void save_checkpoint(const Model& m, const std::string& path) {
  textio::write_file(path, checkpoint_bytes(m));
}

Model load_checkpoint(const std::string& path) {
  return model_from_checkpoint_bytes(textio::read_file(path));
}

}  // namespace fairnvt::model
