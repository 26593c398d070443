#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "histoseg/core/tensor.hpp"

namespace histoseg::core {

// Named trainable tensor plus its gradient and optimizer state. Frozen
// quantities (backbone features, text embeddings) are never Params; they enter
// graphs as constants, which structurally guarantees no gradient reaches them.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m, v;  // AdamW moments, sized on first optimizer step
};

class ParamStore {
 public:
  Param& create(const std::string& name, Tensor init);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  // Creation order; deterministic for optimizer sweeps and checkpoints.
  const std::vector<std::unique_ptr<Param>>& items() const { return items_; }
  int64_t total_count() const;
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Param>> items_;
  std::unordered_map<std::string, Param*> index_;
};

struct Node {
  Tensor val;
  Tensor grad;  // stays empty unless backward touches this node
  bool needs = false;
  std::function<void()> back;
};
using Var = Node*;

// Single-use reverse-mode tape. Creation order is a topological order, so
// backward() is one reverse sweep. Build a fresh Graph per forward pass.
class Graph {
 public:
  Var constant(Tensor v);
  Var leaf(Tensor v, bool needs_grad);
  Var param(Param& p);  // leaf bound to p; backward() adds into p.grad

  // Seeds d(root)/d(root) = 1 and sweeps the tape once. root must be scalar.
  void backward(Var root);

  Node* make(Tensor val, bool needs);
  static Tensor& grad_of(Node* n);

 private:
  std::deque<Node> nodes_;  // deque: stable addresses for closure captures
  std::vector<std::pair<Node*, Param*>> bindings_;
  bool swept_ = false;
};

// Elementwise / shape ops.
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double c);
Var scale_by(Graph& g, Var a, Var s);  // s scalar
Var gelu(Graph& g, Var x);
Var clamp_v(Graph& g, Var x, double lo, double hi);
Var chw_to_tokens(Graph& g, Var x);  // (C,H,W) -> (H*W, C), row-major positions
Var pad_cols(Graph& g, Var x, int out_cols);

// Linear algebra.
Var matmul(Graph& g, Var a, Var b);
Var transpose2(Graph& g, Var a);
Var linear(Graph& g, Var x, Var w, Var b);  // x:(n,d) w:(h,d) b:(h) -> (n,h)
Var l2norm_rows(Graph& g, Var x, double eps);

// Conv blocks used by the adapters.
Var conv1x1(Graph& g, Var x, Var w, Var b);    // x:(C,H,W) w:(Co,Ci) b:(Co)
Var dwconv3x3(Graph& g, Var x, Var w, Var b);  // w:(C,3,3) b:(C), zero padded
Var channel_norm(Graph& g, Var x, Var gamma, Var beta, double eps);

// Reductions / losses.
Var col_mean(Graph& g, Var x);                         // (n,c) -> (c)
Var mse_vs(Graph& g, Var x, const Tensor& target);     // scalar
Var bce_logits(Graph& g, Var z, const Tensor& targets);  // scalar, mean
Var rows_dot(Graph& g, Var m, const Tensor& q);        // (C,d)·q -> (C)
Var dot_with(Graph& g, Var v, const Tensor& q);        // (d)·q -> scalar
Var row_of(Graph& g, Var m, int r);                    // (n,d) -> (d)
Var gather1(Graph& g, Var v, int i);
Var concat_scalars(Graph& g, const std::vector<Var>& vars, const std::vector<double>& consts);
Var logsumexp_v(Graph& g, Var v);
Var mean_scalars(Graph& g, const std::vector<Var>& xs);  // empty -> 0

}  // namespace histoseg::core
