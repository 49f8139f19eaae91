#include "fairnvt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fairnvt/errors.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::metrics {

namespace {

std::size_t task_classes(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("metric undefined on an empty record set");
  const std::size_t k = records[0].probs.size();
  if (k < 2) throw MetricError("records carry fewer than two class probabilities");
  for (const EvalRecord& r : records) {
    if (r.probs.size() != k) throw MetricError("records disagree on class count");
  }
  return k;
}

void check_binary_task(const std::vector<EvalRecord>& records, const char* metric) {
  if (task_classes(records) != 2) {
    throw MetricError(std::string("unsupported metric: ") + metric + " requires a binary task");
  }
  for (const EvalRecord& r : records) {
    if (r.s != 0 && r.s != 1) {
      throw MetricError(std::string("unsupported metric: ") + metric +
                        " requires a binary sensitive attribute, got group " +
                        std::to_string(r.s));
    }
  }
}

// P(yhat=1 | y, s) over the four (y, s) cells; an empty cell is an error
// naming the cell.
double positive_rate_cell(const std::vector<EvalRecord>& records, int y, int s,
                          const char* metric) {
  std::size_t n = 0, pos = 0;
  for (const EvalRecord& r : records) {
    if (r.y_true == y && r.s == s) {
      ++n;
      if (r.y_pred == 1) ++pos;
    }
  }
  if (n == 0) {
    throw MetricError(std::string(metric) + " undefined: empty cell (y=" + std::to_string(y) +
                      ", s=" + std::to_string(s) + ")");
  }
  return static_cast<double>(pos) / static_cast<double>(n);
}

}  // namespace

double accuracy(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("accuracy undefined on an empty record set");
  std::size_t hit = 0;
  for (const EvalRecord& r : records) {
    if (r.y_pred == r.y_true) ++hit;
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(records.size());
}

double balanced_accuracy(const std::vector<EvalRecord>& records) {
  const std::size_t k = task_classes(records);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t n = 0, hit = 0;
    for (const EvalRecord& r : records) {
      if (r.y_true == static_cast<int>(c)) {
        ++n;
        if (r.y_pred == r.y_true) ++hit;
      }
    }
    if (n == 0) {
      throw MetricError("balanced accuracy undefined: no samples with true class " +
                        std::to_string(c));
    }
    sum += static_cast<double>(hit) / static_cast<double>(n);
  }
  return 100.0 * sum / static_cast<double>(k);
}

double demographic_parity(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("demographic parity undefined on an empty record set");
  std::map<int, std::pair<std::size_t, std::size_t>> groups;  // s -> (n, positives)
  for (const EvalRecord& r : records) {
    auto& [n, pos] = groups[r.s];
    ++n;
    if (r.y_pred == 1) ++pos;
  }
  if (groups.size() < 2) {
    throw MetricError("demographic parity undefined: single sensitive group");
  }
  double lo = 1.0, hi = 0.0;
  for (const auto& [s, counts] : groups) {
    const double rate = static_cast<double>(counts.second) / static_cast<double>(counts.first);
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }
  return 100.0 * (hi - lo);
}

double equal_opportunity(const std::vector<EvalRecord>& records) {
  check_binary_task(records, "equal opportunity");
  const double t0 = positive_rate_cell(records, 1, 0, "equal opportunity");
  const double t1 = positive_rate_cell(records, 1, 1, "equal opportunity");
  return 100.0 * std::fabs(t0 - t1);
}

double equalized_odds(const std::vector<EvalRecord>& records) {
  check_binary_task(records, "equalized odds");
  double sum = 0.0;
  for (int y = 0; y <= 1; ++y) {
    const double r0 = positive_rate_cell(records, y, 0, "equalized odds");
    const double r1 = positive_rate_cell(records, y, 1, "equalized odds");
    sum += std::fabs(r0 - r1);
  }
  return 100.0 * 0.5 * sum;
}

std::string serialize_report(const MetricsReport& report) {
  std::string out;
  const auto line = [&out](const char* key, double v) {
    out += key;
    out += '=';
    out += textio::fmt_fixed(v, 4);
    out += '\n';
  };
  line("acc", report.acc);
  line("bacc", report.bacc);
  line("dp", report.dp);
  line("eopp", report.eopp);
  line("eo", report.eo);
  line("att_acc", report.att_acc);
  line("balanced_att_acc", report.balanced_att_acc);
  return out;
}

MetricsReport parse_report(const std::string& text) {
  MetricsReport r;
  std::map<std::string, double*> fields{
      {"acc", &r.acc},       {"bacc", &r.bacc},
      {"dp", &r.dp},         {"eopp", &r.eopp},
      {"eo", &r.eo},         {"att_acc", &r.att_acc},
      {"balanced_att_acc", &r.balanced_att_acc}};
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (const std::string& line : textio::split(text, '\n')) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("metrics report line " + std::to_string(lineno) + ": missing '='");
    }
    const std::string key = line.substr(0, eq);
    auto it = fields.find(key);
    if (it == fields.end()) {
      throw FormatError("metrics report line " + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    }
    *it->second = textio::parse_double_strict(line.substr(eq + 1),
                                              "metrics report line " + std::to_string(lineno));
    seen.insert(key);
  }
  if (seen.size() != fields.size()) {
    throw FormatError("metrics report is missing keys");
  }
  return r;
}

}  // namespace fairnvt::metrics
