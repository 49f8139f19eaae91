#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "fairnvt/tensor.hpp"

namespace fairnvt::ad {

// Handle to a node on a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
};

// Gradient of a scalar loss with respect to named parameters.
struct Gradients {
  std::map<std::string, Tensor> by_name;

  const Tensor& at(const std::string& name) const;
  bool all_finite() const;
};

// Named parameter tensors with a trainable flag. Frozen tensors stay in the
// store (they are serialized with checkpoints) but are excluded from
// trainable_names() and therefore never receive gradients or optimizer steps.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value, bool trainable);
  bool contains(const std::string& name) const;
  const Tensor& value(const std::string& name) const;
  Tensor& value(const std::string& name);
  bool trainable(const std::string& name) const;
  std::vector<std::string> names() const;  // lexicographic
  std::vector<std::string> trainable_names() const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Tensor value;
    bool trainable = false;
  };
  std::map<std::string, Entry> entries_;
};

// Reverse-mode autodiff tape, rebuilt per forward pass (define-by-run). Nodes
// are append-only; backward walks them in reverse creation order. A tape is
// confined to one thread; parallelism lives inside the kernels.
class Tape {
 public:
  // Leaf that never receives a gradient.
  Var constant(Tensor v);
  // Named differentiable leaf.
  Var param(const std::string& name, const Tensor& v);
  // Named leaf taken from a store; trainability follows the store.
  Var leaf(const ParamStore& store, const std::string& name);

  // c[m x n] = a[m x k] * b[k x n]; both operands rank-2.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  // x[n x k] + row vector b[k], broadcast over rows.
  Var add_bias(Var x, Var b);
  Var tanh(Var a);
  Var relu(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var log(Var a);
  Var abs(Var a);  // subgradient 0 at 0
  Var square(Var a);
  Var sum(Var a);
  Var mean(Var a);
  // Per-row cosine similarity of two [n x d] tensors -> [n]. Rows where either
  // operand has L2 norm < 1e-12 yield 0 and are excluded from the gradient.
  Var cosine_rows(Var a, Var b);
  // Per-row L2 clip e / max(1, |e| / max_norm). Inputs with |e| <= max_norm
  // (boundary included) pass through the identity branch bit-exactly.
  Var l2_clip(Var e, double max_norm);
  // Forward identity whose backward contributes an exact zero.
  Var stop_gradient(Var a);
  // Rank-1 concatenation, or rank-2 along columns with equal row counts.
  Var concat(Var a, Var b);
  // out[i] = x[i, idx[i]] for x[n x K] -> [n].
  Var take_per_row(Var x, const std::vector<int>& idx);

  // The reference stays valid while the tape lives; adding nodes never moves
  // existing ones.
  const Tensor& value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Gradient of a scalar loss for every trainable parameter in the store.
  // Parameters the loss does not touch receive zero tensors.
  Gradients backward(Var loss, const ParamStore& params) const;

 private:
  enum class Op {
    kConstant,
    kParam,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddBias,
    kTanh,
    kRelu,
    kSoftmaxRows,
    kLogSoftmaxRows,
    kLog,
    kAbs,
    kSquare,
    kSum,
    kMean,
    kCosineRows,
    kL2Clip,
    kStopGrad,
    kConcat,
    kTakePerRow,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor value;
    double c = 0.0;            // scale factor or clip bound
    std::vector<int> idx;      // take_per_row indices
    std::vector<double> aux;   // per-row caches (norms, scales, branch flags)
    std::string name;          // param name
    bool needs_grad = false;
  };

  Var push(Node n);
  const Node& node(Var v) const;
  const Tensor& input_value(const Node& n, bool second = false) const;

  // Deque keeps node references stable across growth; value() hands them out.
  std::deque<Node> nodes_;
};

}  // namespace fairnvt::ad
