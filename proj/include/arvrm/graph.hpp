#pragma once

#include <array>
#include <functional>
#include <vector>

#include "arvrm/params.hpp"
#include "arvrm/tensor.hpp"

namespace arvrm {

/// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over tensor operations.
///
/// A Graph is built per forward pass: leaves are either constants (input) or
/// parameters bound to a ParamStore (param). backward() seeds d(loss)=1 and
/// accumulates gradients for every reachable trainable parameter, either into
/// the store's grad tensors or into a caller-owned GradBuffer.
///
/// Frozen parameter groups never receive gradient entries, but gradients
/// still flow through operations that use them, so a frozen head passes
/// signal back to the trunk.
class Graph {
 public:
  explicit Graph(ParamStore* store = nullptr);

  Var input(Tensor value);
  Var param(ParamRef ref);

  // --- arithmetic ---
  Var matmul(Var a, Var b);     // [m,k]x[k,n]
  Var matmul_nt(Var a, Var b);  // [m,k]x[n,k]^T -> [m,n]
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_rowvec(Var x, Var bias);  // [m,n] + [n] per row
  Var add_const(Var a, double c);
  Var scale(Var a, double c);
  Var scale_by(Var x, Var s);  // s is a one-element tensor (learnable scalar)

  // --- nonlinearities / normalization ---
  Var tanh_(Var a);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var softmax_rows(Var x);

  /// Multi-head causal self-attention over packed qkv [T, 3*d].
  /// Row t attends to rows 0..t only; masked positions are never visited, so
  /// prefix outputs are bit-exact under future-token perturbations.
  Var causal_mha(Var qkv, std::size_t heads);

  // --- shape plumbing ---
  Var slice_rows(Var x, std::size_t r0, std::size_t r1);
  Var row(Var x, std::size_t r) { return slice_rows(x, r, r + 1); }
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var table, std::vector<std::size_t> indices);
  Var mean_rows(Var x);
  Var reshape(Var x, std::vector<std::size_t> dims);

  /// Per-node affine readout: f[N,dn] with weights w[N, dn*out], bias b[N,out]
  /// gives out[i,:] = f[i,:] * W_i + b[i,:].
  Var node_readout(Var features, Var weights, Var bias, std::size_t out_dim);

  // --- losses ---
  Var mse(Var pred, Var target);  // scalar [1]
  Var sum_all(Var x);             // scalar [1]

  const Tensor& value(Var v) const { return val(v.id); }
  double scalar(Var v) const;  // value of a one-element tensor

  /// Accumulates gradients of loss (a one-element tensor) into the store's
  /// grad tensors (or `buffer` when given). Throws Error if loss is not
  /// scalar.
  void backward(Var loss);
  void backward(Var loss, GradBuffer& buffer);

  /// Gradient tensor of any node after backward(); empty if unreached.
  const Tensor& grad(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }
  ParamStore* store() const { return store_; }

 private:
  struct Node {
    Tensor owned;  // storage for computed values; leaves read from the store
    Tensor grad;
    Tensor aux;    // saved activations for backward
    ParamRef leaf;
    bool needs_grad = false;
    std::array<int, 3> parents{-1, -1, -1};
    std::function<void(Graph&, int)> backward_fn;
  };

  const Tensor& val(int id) const {
    const Node& n = nodes_[id];
    return n.leaf.valid() ? store_->param(n.leaf).value : n.owned;
  }

  int push(Node node);
  Node make_op(Tensor value, std::initializer_list<Var> parents);
  Tensor& grad_buffer(int id);
  bool wants_grad(int id) const { return id >= 0 && nodes_[id].needs_grad; }
  void run_backward(Var loss, GradBuffer* sink_buffer);

  ParamStore* store_;
  std::vector<Node> nodes_;
};

}  // namespace arvrm
