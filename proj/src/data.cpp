#include "fairnvt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fairnvt/errors.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::data {

namespace {

// Label copula correlation between the latent normals behind y and s, and the
// isotropic feature noise scale. Both are generator-shape constants, not user
// knobs: together with rho/task_sep they set how much of s is recoverable
// from the features versus through y itself.
constexpr double kLabelCorr = 0.08;
constexpr double kFeatureNoise = 0.3;

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.2e-9 on (0, 1).
double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValueError("probit domain is (0, 1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_per_split == 0) throw ConfigError("n per split must be positive");
  if (cfg.dim == 0) throw ConfigError("feature dimension must be positive");
  if (!(cfg.rho >= 0.0 && cfg.rho <= 1.0)) throw ConfigError("rho must be in [0, 1]");
  if (!(cfg.task_sep > 0.0)) throw ConfigError("task_sep must be positive");
  if (!(cfg.base_rate_y > 0.0 && cfg.base_rate_y < 1.0)) {
    throw ConfigError("base_rate_y must be in (0, 1)");
  }
  if (!(cfg.base_rate_s > 0.0 && cfg.base_rate_s < 1.0)) {
    throw ConfigError("base_rate_s must be in (0, 1)");
  }
}

std::vector<double> unit_direction(std::size_t dim, RngStream& rng) {
  std::vector<double> v(dim);
  double ss = 0.0;
  do {
    ss = 0.0;
    for (auto& c : v) {
      c = rng.next_gaussian();
      ss += c * c;
    }
  } while (ss < 1e-12);
  const double inv = 1.0 / std::sqrt(ss);
  for (auto& c : v) c *= inv;
  return v;
}

Dataset generate_split(const SynthConfig& cfg, const std::vector<double>& mu,
                       const std::vector<double>& nu, const std::string& split,
                       RngStream rng) {
  const std::size_t n = cfg.n_per_split;
  const std::size_t d = cfg.dim;
  const double z_y = probit(cfg.base_rate_y);
  const double z_s = probit(cfg.base_rate_s);
  const double mix = std::sqrt(kLabelCorr);
  const double rest = std::sqrt(1.0 - kLabelCorr);

  Dataset out;
  out.split = split;
  out.x = Tensor({n, d});
  out.y.resize(n);
  out.s.resize(n);
  out.id.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double shared = rng.next_gaussian();
    const double g_y = mix * shared + rest * rng.next_gaussian();
    const double g_s = mix * shared + rest * rng.next_gaussian();
    const int y = g_y < z_y ? 1 : 0;
    const int s = g_s < z_s ? 1 : 0;
    out.y[i] = y;
    out.s[i] = s;
    const double y_sign = y == 1 ? 1.0 : -1.0;
    const double s_sign = s == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      out.x.at(i, j) = cfg.task_sep * y_sign * mu[j] + cfg.rho * s_sign * nu[j] +
                       kFeatureNoise * rng.next_gaussian();
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%06zu", split.c_str(), i);
    out.id[i] = buf;
  }
  return out;
}

}  // namespace

int Dataset::max_label(const std::vector<int>& v) const {
  if (v.empty()) throw ValueError("empty dataset has no labels");
  int m = 0;
  for (int c : v) {
    if (c < 0) throw ValueError("negative label");
    m = std::max(m, c);
  }
  return m;
}

Splits generate(const SynthConfig& cfg) {
  validate(cfg);
  RngStream root(cfg.seed, stream_id::kDataGen);
  RngStream dir_rng = root.substream(0);
  const std::vector<double> mu = unit_direction(cfg.dim, dir_rng);
  const std::vector<double> nu = unit_direction(cfg.dim, dir_rng);

  Splits sp;
  sp.train = generate_split(cfg, mu, nu, "train", root.substream(1));
  sp.val = generate_split(cfg, mu, nu, "val", root.substream(2));
  sp.test = generate_split(cfg, mu, nu, "test", root.substream(3));
  return sp;
}

void save_csv(const Dataset& d, const std::string& path) {
  if (d.x.rank() != 2 || d.x.shape()[0] != d.size() || d.id.size() != d.size() ||
      d.s.size() != d.size()) {
    throw ShapeError("dataset rows are not aligned");
  }
  std::string out = "id,y,s";
  for (std::size_t j = 0; j < d.dim(); ++j) {
    out += ",f_";
    out += std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out += d.id[i];
    out += ',';
    out += std::to_string(d.y[i]);
    out += ',';
    out += std::to_string(d.s[i]);
    for (std::size_t j = 0; j < d.dim(); ++j) {
      out += ',';
      out += textio::fmt_g17(d.x.at(i, j));
    }
    out += '\n';
  }
  textio::write_file(path, out);
}

Dataset load_csv(const std::string& path, const std::string& split) {
  const std::string text = textio::read_file(path);
  std::vector<std::string> lines = textio::split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError(path + ":1: empty file");

  const std::vector<std::string> head = textio::split(lines[0], ',');
  const char* fixed[] = {"id", "y", "s"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (head.size() <= i || head[i] != fixed[i]) {
      throw FormatError(path + ":1: header must start with id,y,s (missing column " +
                        fixed[i] + ")");
    }
  }
  const std::size_t d = head.size() - 3;
  if (d == 0) throw FormatError(path + ":1: no feature columns (missing column f_0)");
  for (std::size_t j = 0; j < d; ++j) {
    if (head[3 + j] != "f_" + std::to_string(j)) {
      throw FormatError(path + ":1: header must list features in order (missing column f_" +
                        std::to_string(j) + ")");
    }
  }

  const std::size_t n = lines.size() - 1;
  if (n == 0) throw FormatError(path + ":2: no data rows");
  Dataset out;
  out.split = split;
  out.x = Tensor({n, d});
  out.y.resize(n);
  out.s.resize(n);
  out.id.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string line_no = std::to_string(i + 2);
    const std::vector<std::string> cells = textio::split(lines[i + 1], ',');
    if (cells.size() != head.size()) {
      throw FormatError(path + ":" + line_no + ": expected " + std::to_string(head.size()) +
                        " cells, got " + std::to_string(cells.size()));
    }
    out.id[i] = cells[0];
    const std::string ctx = path + ":" + line_no;
    const long long y = textio::parse_int_strict(cells[1], ctx + ": column y");
    const long long s = textio::parse_int_strict(cells[2], ctx + ": column s");
    if (y < 0 || s < 0) throw FormatError(ctx + ": labels must be non-negative");
    out.y[i] = static_cast<int>(y);
    out.s[i] = static_cast<int>(s);
    for (std::size_t j = 0; j < d; ++j) {
      const double v =
          textio::parse_double_strict(cells[3 + j], ctx + ": column f_" + std::to_string(j));
      if (!std::isfinite(v)) {
        throw FormatError(ctx + ": column f_" + std::to_string(j) + " is not finite");
      }
      out.x.at(i, j) = v;
    }
  }
  return out;
}

void save_splits(const Splits& sp, const std::string& dir) {
  save_csv(sp.train, dir + "/train.csv");
  save_csv(sp.val, dir + "/val.csv");
  save_csv(sp.test, dir + "/test.csv");
}

Splits load_splits(const std::string& dir) {
  Splits sp;
  sp.train = load_csv(dir + "/train.csv", "train");
  sp.val = load_csv(dir + "/val.csv", "val");
  sp.test = load_csv(dir + "/test.csv", "test");
  return sp;
}

}  // namespace fairnvt::data
