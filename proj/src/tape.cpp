#include "fairnvt/tape.hpp"

#include <cmath>
#include <utility>

#include "fairnvt/errors.hpp"
#include "fairnvt/kernels.hpp"

namespace fairnvt::ad {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

constexpr double kDegenerateNorm = 1e-12;

}  // namespace

const Tensor& Gradients::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw Error("no gradient entry for '" + name + "'");
  return it->second;
}

bool Gradients::all_finite() const {
  for (const auto& [name, g] : by_name) {
    if (!g.all_finite()) return false;
  }
  return true;
}

void ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (name.empty()) throw Error("parameter name must be non-empty");
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(value), trainable});
  if (!inserted) throw Error("duplicate parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second.value;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second.trainable;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) out.push_back(name);
  }
  return out;
}

Var Tape::push(Node n) {
  if (!n.value.all_finite()) {
    throw NumericAbort("tape op produced non-finite values");
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw Error("Var does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::input_value(const Node& n, bool second) const {
  return nodes_[static_cast<std::size_t>(second ? n.b : n.a)].value;
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::param(const std::string& name, const Tensor& v) {
  if (name.empty()) throw Error("param requires a non-empty name");
  Node n;
  n.op = Op::kParam;
  n.value = v;
  n.name = name;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::leaf(const ParamStore& store, const std::string& name) {
  if (store.trainable(name)) return param(name, store.value(name));
  return constant(store.value(name));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.rank() == 2 && B.rank() == 2,
          "matmul requires rank-2 operands, got " + A.shape_str() + " and " + B.shape_str());
  require(A.shape()[1] == B.shape()[0],
          "matmul inner dimensions differ: " + A.shape_str() + " vs " + B.shape_str());
  const std::size_t m = A.shape()[0], k = A.shape()[1], nn = B.shape()[1];
  Tensor out({m, nn});
  kernels::matmul_nn(A.data(), B.data(), out.data(), m, k, nn);
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.same_shape(B), "add shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor out(A.shape());
  kernels::zip(A.data(), B.data(), out.data(), A.size(), [](double x, double y) { return x + y; });
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.same_shape(B), "sub shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor out(A.shape());
  kernels::zip(A.data(), B.data(), out.data(), A.size(), [](double x, double y) { return x - y; });
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.same_shape(B), "mul shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor out(A.shape());
  kernels::zip(A.data(), B.data(), out.data(), A.size(), [](double x, double y) { return x * y; });
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  if (!std::isfinite(c)) throw ValueError("scale factor must be finite");
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [c](double x) { return c * x; });
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c = c;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var b) {
  const Tensor& X = node(x).value;
  const Tensor& B = node(b).value;
  require(B.rank() == 1, "add_bias expects a rank-1 bias, got " + B.shape_str());
  require(X.cols() == B.shape()[0],
          "add_bias width mismatch: " + X.shape_str() + " vs " + B.shape_str());
  require(X.rank() == 1 || X.rank() == 2, "add_bias expects rank-1 or rank-2 input");
  Tensor out(X.shape());
  const std::size_t rows = X.rows(), cols = X.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = X[r * cols + c] + B[c];
  }
  Node n;
  n.op = Op::kAddBias;
  n.a = x.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(x).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [](double x) { return std::tanh(x); });
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [](double x) { return x > 0.0 ? x : 0.0; });
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
  const Tensor& A = node(a).value;
  require(A.rank() >= 1, "softmax_rows expects rank-1 or rank-2 input");
  Tensor out(A.shape());
  kernels::softmax_rows(A.data(), out.data(), A.rows(), A.cols());
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& A = node(a).value;
  require(A.rank() >= 1, "log_softmax_rows expects rank-1 or rank-2 input");
  Tensor out(A.shape());
  kernels::log_softmax_rows(A.data(), out.data(), A.rows(), A.cols());
  Node n;
  n.op = Op::kLogSoftmaxRows;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [](double x) { return std::log(x); });
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::abs(Var a) {
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [](double x) { return std::fabs(x); });
  Node n;
  n.op = Op::kAbs;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::square(Var a) {
  const Tensor& A = node(a).value;
  Tensor out(A.shape());
  kernels::map(A.data(), out.data(), A.size(), [](double x) { return x * x; });
  Node n;
  n.op = Op::kSquare;
  n.a = a.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Tensor& A = node(a).value;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Tensor::scalar(acc);
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Tensor& A = node(a).value;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.value = Tensor::scalar(acc / static_cast<double>(A.size()));
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

Var Tape::cosine_rows(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.same_shape(B),
          "cosine_rows shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  require(A.rank() >= 1, "cosine_rows expects rank-1 or rank-2 input");
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out({rows});
  Node n;
  n.aux.resize(rows * 3);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, ssa = 0.0, ssb = 0.0;
    const double* ar = A.data() + r * cols;
    const double* br = B.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dot += ar[c] * br[c];
      ssa += ar[c] * ar[c];
      ssb += br[c] * br[c];
    }
    const double na = std::sqrt(ssa), nb = std::sqrt(ssb);
    n.aux[r * 3] = dot;
    n.aux[r * 3 + 1] = na;
    n.aux[r * 3 + 2] = nb;
    out[r] = (na < kDegenerateNorm || nb < kDegenerateNorm) ? 0.0 : dot / (na * nb);
  }
  n.op = Op::kCosineRows;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::l2_clip(Var e, double max_norm) {
  if (!(max_norm > 0.0) || !std::isfinite(max_norm)) {
    throw ValueError("l2_clip bound must be a positive finite scalar");
  }
  const Tensor& E = node(e).value;
  require(E.rank() >= 1, "l2_clip expects rank-1 or rank-2 input");
  const std::size_t rows = E.rows(), cols = E.cols();
  const double bound_sq = max_norm * max_norm;
  Tensor out(E.shape());
  Node n;
  n.aux.resize(rows * 3);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* er = E.data() + r * cols;
    double* or_ = out.data() + r * cols;
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += er[c] * er[c];
    double scale = 1.0;
    double clipped = 0.0;
    if (ss <= bound_sq) {
      // Identity branch, boundary included: the row passes through bit-exactly.
      for (std::size_t c = 0; c < cols; ++c) or_[c] = er[c];
    } else {
      clipped = 1.0;
      scale = max_norm / std::sqrt(ss);
      // Nudge the scale down by ulps until the clipped row measures inside the
      // ball, so a second application takes the identity branch bit-exactly.
      for (;;) {
        double oss = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          or_[c] = scale * er[c];
          oss += or_[c] * or_[c];
        }
        if (oss <= bound_sq) break;
        scale = std::nextafter(scale, 0.0);
      }
    }
    n.aux[r * 3] = scale;
    n.aux[r * 3 + 1] = ss;
    n.aux[r * 3 + 2] = clipped;
  }
  n.op = Op::kL2Clip;
  n.a = e.id;
  n.c = max_norm;
  n.value = std::move(out);
  n.needs_grad = node(e).needs_grad;
  return push(std::move(n));
}

Var Tape::stop_gradient(Var a) {
  Node n;
  n.op = Op::kStopGrad;
  n.a = a.id;
  n.value = node(a).value;
  n.needs_grad = false;
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require(A.rank() == B.rank() && A.rank() >= 1,
          "concat requires equal ranks, got " + A.shape_str() + " and " + B.shape_str());
  Tensor out;
  if (A.rank() == 1) {
    out = Tensor({A.size() + B.size()});
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i];
    for (std::size_t i = 0; i < B.size(); ++i) out[A.size() + i] = B[i];
  } else {
    require(A.shape()[0] == B.shape()[0],
            "concat batch dimensions differ: " + A.shape_str() + " vs " + B.shape_str());
    const std::size_t rows = A.shape()[0], ca = A.shape()[1], cb = B.shape()[1];
    out = Tensor({rows, ca + cb});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ca; ++c) out[r * (ca + cb) + c] = A[r * ca + c];
      for (std::size_t c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = B[r * cb + c];
    }
  }
  Node n;
  n.op = Op::kConcat;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::take_per_row(Var x, const std::vector<int>& idx) {
  const Tensor& X = node(x).value;
  require(X.rank() == 2, "take_per_row expects a rank-2 input, got " + X.shape_str());
  const std::size_t rows = X.shape()[0], cols = X.shape()[1];
  require(idx.size() == rows, "take_per_row index count " + std::to_string(idx.size()) +
                                  " does not match row count " + std::to_string(rows));
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const int j = idx[r];
    if (j < 0 || static_cast<std::size_t>(j) >= cols) {
      throw ShapeError("take_per_row index " + std::to_string(j) + " out of range for " +
                       X.shape_str());
    }
    out[r] = X[r * cols + static_cast<std::size_t>(j)];
  }
  Node n;
  n.op = Op::kTakePerRow;
  n.a = x.id;
  n.idx = idx;
  n.value = std::move(out);
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

Gradients Tape::backward(Var loss, const ParamStore& params) const {
  const Node& loss_node = node(loss);
  require(loss_node.value.size() == 1, "backward requires a scalar loss, got " +
                                           loss_node.value.shape_str());

  std::vector<Tensor> grad(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  grad[static_cast<std::size_t>(loss.id)] = Tensor(loss_node.value.shape());
  grad[static_cast<std::size_t>(loss.id)][0] = 1.0;
  has[static_cast<std::size_t>(loss.id)] = 1;

  auto acc = [&](int id, const Tensor& delta) {
    if (id < 0) return;
    const auto u = static_cast<std::size_t>(id);
    if (!nodes_[u].needs_grad) return;
    if (!has[u]) {
      grad[u] = delta;
      has[u] = 1;
    } else {
      double* d = grad[u].data();
      const double* s = delta.data();
      for (std::size_t i = 0; i < grad[u].size(); ++i) d[i] += s[i];
    }
  };

  for (int i = loss.id; i >= 0; --i) {
    const auto u = static_cast<std::size_t>(i);
    if (!has[u] || !nodes_[u].needs_grad) continue;
    const Node& n = nodes_[u];
    const Tensor& g = grad[u];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
      case Op::kStopGrad:
        break;
      case Op::kMatMul: {
        const Tensor& A = input_value(n);
        const Tensor& B = input_value(n, true);
        const std::size_t m = A.shape()[0], k = A.shape()[1], nn = B.shape()[1];
        if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
          Tensor da({m, k});
          kernels::matmul_nt(g.data(), B.data(), da.data(), m, nn, k);
          acc(n.a, da);
        }
        if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
          Tensor db({k, nn});
          kernels::matmul_tn(A.data(), g.data(), db.data(), k, m, nn);
          acc(n.b, db);
        }
        break;
      }
      case Op::kAdd:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::kSub: {
        acc(n.a, g);
        if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
          Tensor db(g.shape());
          kernels::map(g.data(), db.data(), g.size(), [](double x) { return -x; });
          acc(n.b, db);
        }
        break;
      }
      case Op::kMul: {
        const Tensor& A = input_value(n);
        const Tensor& B = input_value(n, true);
        if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
          Tensor da(g.shape());
          kernels::zip(g.data(), B.data(), da.data(), g.size(),
                       [](double x, double y) { return x * y; });
          acc(n.a, da);
        }
        if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
          Tensor db(g.shape());
          kernels::zip(g.data(), A.data(), db.data(), g.size(),
                       [](double x, double y) { return x * y; });
          acc(n.b, db);
        }
        break;
      }
      case Op::kScale: {
        Tensor da(g.shape());
        const double c = n.c;
        kernels::map(g.data(), da.data(), g.size(), [c](double x) { return c * x; });
        acc(n.a, da);
        break;
      }
      case Op::kAddBias: {
        acc(n.a, g);
        if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
          const Tensor& X = input_value(n);
          const std::size_t rows = X.rows(), cols = X.cols();
          Tensor db({cols});
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) db[c] += g[r * cols + c];
          }
          acc(n.b, db);
        }
        break;
      }
      case Op::kTanh: {
        Tensor da(g.shape());
        kernels::zip(g.data(), n.value.data(), da.data(), g.size(),
                     [](double gv, double y) { return gv * (1.0 - y * y); });
        acc(n.a, da);
        break;
      }
      case Op::kRelu: {
        const Tensor& X = input_value(n);
        Tensor da(g.shape());
        kernels::zip(g.data(), X.data(), da.data(), g.size(),
                     [](double gv, double x) { return x > 0.0 ? gv : 0.0; });
        acc(n.a, da);
        break;
      }
      case Op::kSoftmaxRows: {
        const Tensor& Y = n.value;
        const std::size_t rows = Y.rows(), cols = Y.cols();
        Tensor da(Y.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = Y.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
          double* dr = da.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dr[c] = yr[c] * (gr[c] - dot);
        }
        acc(n.a, da);
        break;
      }
      case Op::kLogSoftmaxRows: {
        const Tensor& Y = n.value;  // log-probabilities
        const std::size_t rows = Y.rows(), cols = Y.cols();
        Tensor da(Y.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = Y.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double gsum = 0.0;
          for (std::size_t c = 0; c < cols; ++c) gsum += gr[c];
          double* dr = da.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dr[c] = gr[c] - std::exp(yr[c]) * gsum;
        }
        acc(n.a, da);
        break;
      }
      case Op::kLog: {
        const Tensor& X = input_value(n);
        Tensor da(g.shape());
        kernels::zip(g.data(), X.data(), da.data(), g.size(),
                     [](double gv, double x) { return gv / x; });
        acc(n.a, da);
        break;
      }
      case Op::kAbs: {
        const Tensor& X = input_value(n);
        Tensor da(g.shape());
        kernels::zip(g.data(), X.data(), da.data(), g.size(), [](double gv, double x) {
          return x > 0.0 ? gv : (x < 0.0 ? -gv : 0.0);
        });
        acc(n.a, da);
        break;
      }
      case Op::kSquare: {
        const Tensor& X = input_value(n);
        Tensor da(g.shape());
        kernels::zip(g.data(), X.data(), da.data(), g.size(),
                     [](double gv, double x) { return 2.0 * x * gv; });
        acc(n.a, da);
        break;
      }
      case Op::kSum: {
        const Tensor& X = input_value(n);
        Tensor da(X.shape());
        const double gv = g[0];
        for (std::size_t j = 0; j < da.size(); ++j) da[j] = gv;
        acc(n.a, da);
        break;
      }
      case Op::kMean: {
        const Tensor& X = input_value(n);
        Tensor da(X.shape());
        const double gv = g[0] / static_cast<double>(X.size());
        for (std::size_t j = 0; j < da.size(); ++j) da[j] = gv;
        acc(n.a, da);
        break;
      }
      case Op::kCosineRows: {
        const Tensor& A = input_value(n);
        const Tensor& B = input_value(n, true);
        const std::size_t rows = A.rows(), cols = A.cols();
        const bool wa = nodes_[static_cast<std::size_t>(n.a)].needs_grad;
        const bool wb = nodes_[static_cast<std::size_t>(n.b)].needs_grad;
        Tensor da, db;
        if (wa) da = Tensor(A.shape());
        if (wb) db = Tensor(B.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double dot = n.aux[r * 3];
          const double na = n.aux[r * 3 + 1];
          const double nb = n.aux[r * 3 + 2];
          if (na < kDegenerateNorm || nb < kDegenerateNorm) continue;
          const double gv = g[r];
          const double* ar = A.data() + r * cols;
          const double* br = B.data() + r * cols;
          const double inv = 1.0 / (na * nb);
          if (wa) {
            const double ca = dot / (na * na);
            double* dr = da.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dr[c] = gv * inv * (br[c] - ca * ar[c]);
          }
          if (wb) {
            const double cb = dot / (nb * nb);
            double* dr = db.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dr[c] = gv * inv * (ar[c] - cb * br[c]);
          }
        }
        if (wa) acc(n.a, da);
        if (wb) acc(n.b, db);
        break;
      }
      case Op::kL2Clip: {
        const Tensor& E = input_value(n);
        const std::size_t rows = E.rows(), cols = E.cols();
        Tensor da(E.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double scale = n.aux[r * 3];
          const double ss = n.aux[r * 3 + 1];
          const bool clipped = n.aux[r * 3 + 2] != 0.0;
          const double* er = E.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double* dr = da.data() + r * cols;
          if (!clipped) {
            for (std::size_t c = 0; c < cols; ++c) dr[c] = gr[c];
          } else {
            double eg = 0.0;
            for (std::size_t c = 0; c < cols; ++c) eg += er[c] * gr[c];
            const double coef = scale * eg / ss;
            for (std::size_t c = 0; c < cols; ++c) dr[c] = scale * gr[c] - coef * er[c];
          }
        }
        acc(n.a, da);
        break;
      }
      case Op::kConcat: {
        const Tensor& A = input_value(n);
        const Tensor& B = input_value(n, true);
        const bool wa = nodes_[static_cast<std::size_t>(n.a)].needs_grad;
        const bool wb = nodes_[static_cast<std::size_t>(n.b)].needs_grad;
        if (A.rank() == 1) {
          if (wa) {
            Tensor da(A.shape());
            for (std::size_t j = 0; j < A.size(); ++j) da[j] = g[j];
            acc(n.a, da);
          }
          if (wb) {
            Tensor db(B.shape());
            for (std::size_t j = 0; j < B.size(); ++j) db[j] = g[A.size() + j];
            acc(n.b, db);
          }
        } else {
          const std::size_t rows = A.shape()[0], ca = A.shape()[1], cb = B.shape()[1];
          if (wa) {
            Tensor da(A.shape());
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] = g[r * (ca + cb) + c];
            acc(n.a, da);
          }
          if (wb) {
            Tensor db(B.shape());
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] = g[r * (ca + cb) + ca + c];
            acc(n.b, db);
          }
        }
        break;
      }
      case Op::kTakePerRow: {
        const Tensor& X = input_value(n);
        const std::size_t cols = X.shape()[1];
        Tensor da(X.shape());
        for (std::size_t r = 0; r < n.idx.size(); ++r) {
          da[r * cols + static_cast<std::size_t>(n.idx[r])] = g[r];
        }
        acc(n.a, da);
        break;
      }
    }
  }

  Gradients out;
  for (const std::string& name : params.trainable_names()) {
    out.by_name.emplace(name, Tensor(params.value(name).shape()));
  }
  for (int i = 0; i <= loss.id; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (nodes_[u].op != Op::kParam || !has[u]) continue;
    auto it = out.by_name.find(nodes_[u].name);
    if (it == out.by_name.end()) continue;
    if (!it->second.same_shape(grad[u])) {
      throw ShapeError("gradient shape mismatch for parameter '" + nodes_[u].name + "'");
    }
    double* d = it->second.data();
    const double* s = grad[u].data();
    for (std::size_t j = 0; j < it->second.size(); ++j) d[j] += s[j];
  }
  if (!out.all_finite()) throw NumericAbort("non-finite gradient");
  return out;
}

}  // namespace fairnvt::ad
