#include "arvrm/graph.hpp"

#include <cmath>
#include <cstring>

#include "arvrm/errors.hpp"
#include "arvrm/kernels.hpp"

namespace arvrm {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Graph::Graph(ParamStore* store) : store_(store) {
  nodes_.reserve(256);
}

int Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Graph::Node Graph::make_op(Tensor value, std::initializer_list<Var> parents) {
  Node n;
  n.owned = std::move(value);
  std::size_t i = 0;
  for (Var p : parents) {
    n.parents[i++] = p.id;
    if (wants_grad(p.id)) n.needs_grad = true;
  }
  return n;
}

Var Graph::input(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = false;
  return Var{push(std::move(n))};
}

Var Graph::param(ParamRef ref) {
  if (store_ == nullptr) throw ConfigError("Graph::param: graph has no ParamStore");
  Node n;
  n.leaf = ref;
  n.needs_grad = !store_->frozen(ref.group);
  return Var{push(std::move(n))};
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw Error("Graph::scalar: tensor " + t.shape_str() + " is not scalar");
  return t.data[0];
}

const Tensor& Graph::grad(Var v) const {
  return nodes_[v.id].grad;
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(val(id).shape);
  return n.grad;
}

// ---------------------------------------------------------------------------
// arithmetic
// ---------------------------------------------------------------------------

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const std::size_t m = ta.rows(), k = ta.cols(), k2 = tb.rows(), n = tb.cols();
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out({m, n});
  kernels::active().matmul_nn(ta.ptr(), tb.ptr(), out.ptr(), m, k, n);
  Node node = make_op(std::move(out), {a, b});
  node.backward_fn = [m, k, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const int pa = me.parents[0], pb = me.parents[1];
    const auto& ops = kernels::active();
    if (g.wants_grad(pa)) {
      ops.matmul_nt(me.grad.ptr(), g.val(pb).ptr(), g.grad_buffer(pa).ptr(), m, n, k);
    }
    if (g.wants_grad(pb)) {
      ops.matmul_tn(g.val(pa).ptr(), me.grad.ptr(), g.grad_buffer(pb).ptr(), m, k, n);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::matmul_nt(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.rows();
  if (k != tb.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ, " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out({m, n});
  kernels::active().matmul_nt(ta.ptr(), tb.ptr(), out.ptr(), m, k, n);
  Node node = make_op(std::move(out), {a, b});
  node.backward_fn = [m, k, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const int pa = me.parents[0], pb = me.parents[1];
    const auto& ops = kernels::active();
    if (g.wants_grad(pa)) {
      // dA[m,k] += dC[m,n] * B[n,k]
      ops.matmul_nn(me.grad.ptr(), g.val(pb).ptr(), g.grad_buffer(pa).ptr(), m, n, k);
    }
    if (g.wants_grad(pb)) {
      // dB[n,k] += dC^T[n,m] * A[m,k]
      ops.matmul_tn(me.grad.ptr(), g.val(pa).ptr(), g.grad_buffer(pb).ptr(), m, n, k);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "add");
  Tensor out(ta.shape);
  kernels::active().vadd(ta.ptr(), tb.ptr(), out.ptr(), ta.size());
  Node node = make_op(std::move(out), {a, b});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    for (int side = 0; side < 2; ++side) {
      const int p = me.parents[side];
      if (g.wants_grad(p)) {
        kernels::active().axpy(1.0, me.grad.ptr(), g.grad_buffer(p).ptr(), me.grad.size());
      }
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "sub");
  Tensor out(ta.shape);
  kernels::active().vsub(ta.ptr(), tb.ptr(), out.ptr(), ta.size());
  Node node = make_op(std::move(out), {a, b});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (g.wants_grad(me.parents[0])) {
      kernels::active().axpy(1.0, me.grad.ptr(), g.grad_buffer(me.parents[0]).ptr(), me.grad.size());
    }
    if (g.wants_grad(me.parents[1])) {
      kernels::active().axpy(-1.0, me.grad.ptr(), g.grad_buffer(me.parents[1]).ptr(), me.grad.size());
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "mul");
  Tensor out(ta.shape);
  kernels::active().vmul(ta.ptr(), tb.ptr(), out.ptr(), ta.size());
  Node node = make_op(std::move(out), {a, b});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const Tensor& va = g.val(me.parents[0]);
    const Tensor& vb = g.val(me.parents[1]);
    if (g.wants_grad(me.parents[0])) {
      Tensor& da = g.grad_buffer(me.parents[0]);
      for (std::size_t i = 0; i < me.grad.size(); ++i) da.data[i] += me.grad.data[i] * vb.data[i];
    }
    if (g.wants_grad(me.parents[1])) {
      Tensor& db = g.grad_buffer(me.parents[1]);
      for (std::size_t i = 0; i < me.grad.size(); ++i) db.data[i] += me.grad.data[i] * va.data[i];
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::add_rowvec(Var x, Var bias) {
  const Tensor& tx = value(x);
  const Tensor& tb = value(bias);
  const std::size_t m = tx.rows(), n = tx.cols();
  if (tb.size() != n) {
    throw ShapeError("add_rowvec: bias " + tb.shape_str() + " does not match row width " + tx.shape_str());
  }
  Tensor out(tx.shape);
  for (std::size_t r = 0; r < m; ++r) {
    kernels::active().vadd(tx.ptr() + r * n, tb.ptr(), out.ptr() + r * n, n);
  }
  Node node = make_op(std::move(out), {x, bias});
  node.backward_fn = [m, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (g.wants_grad(me.parents[0])) {
      kernels::active().axpy(1.0, me.grad.ptr(), g.grad_buffer(me.parents[0]).ptr(), me.grad.size());
    }
    if (g.wants_grad(me.parents[1])) {
      Tensor& db = g.grad_buffer(me.parents[1]);
      for (std::size_t r = 0; r < m; ++r) {
        kernels::active().axpy(1.0, me.grad.ptr() + r * n, db.ptr(), n);
      }
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v += c;
  Node node = make_op(std::move(out), {a});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (g.wants_grad(me.parents[0])) {
      kernels::active().axpy(1.0, me.grad.ptr(), g.grad_buffer(me.parents[0]).ptr(), me.grad.size());
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::scale(Var a, double c) {
  Tensor out = value(a);
  kernels::active().scale(c, out.ptr(), out.size());
  Node node = make_op(std::move(out), {a});
  node.backward_fn = [c](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (g.wants_grad(me.parents[0])) {
      kernels::active().axpy(c, me.grad.ptr(), g.grad_buffer(me.parents[0]).ptr(), me.grad.size());
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::scale_by(Var x, Var s) {
  const Tensor& ts = value(s);
  if (ts.size() != 1) throw ShapeError("scale_by: scalar operand has shape " + ts.shape_str());
  const double sv = ts.data[0];
  Tensor out = value(x);
  kernels::active().scale(sv, out.ptr(), out.size());
  Node node = make_op(std::move(out), {x, s});
  node.backward_fn = [sv](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const Tensor& vx = g.val(me.parents[0]);
    if (g.wants_grad(me.parents[0])) {
      kernels::active().axpy(sv, me.grad.ptr(), g.grad_buffer(me.parents[0]).ptr(), me.grad.size());
    }
    if (g.wants_grad(me.parents[1])) {
      g.grad_buffer(me.parents[1]).data[0] +=
          kernels::active().dot(me.grad.ptr(), vx.ptr(), vx.size());
    }
  };
  return Var{push(std::move(node))};
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

Var Graph::tanh_(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  Node node = make_op(std::move(out), {a});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& da = g.grad_buffer(me.parents[0]);
    const Tensor& y = me.owned;
    for (std::size_t i = 0; i < y.size(); ++i) {
      da.data[i] += me.grad.data[i] * (1.0 - y.data[i] * y.data[i]);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::gelu(Var a) {
  const Tensor& tx = value(a);
  Tensor out(tx.shape);
  for (std::size_t i = 0; i < tx.size(); ++i) {
    const double x = tx.data[i];
    out.data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  Node node = make_op(std::move(out), {a});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    const Tensor& vx = g.val(me.parents[0]);
    Tensor& da = g.grad_buffer(me.parents[0]);
    for (std::size_t i = 0; i < vx.size(); ++i) {
      const double x = vx.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      da.data[i] += me.grad.data[i] * (cdf + x * pdf);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  const std::size_t m = tx.rows(), n = tx.cols();
  if (tg.size() != n || tb.size() != n) {
    throw ShapeError("layer_norm: gamma/beta " + tg.shape_str() + "/" + tb.shape_str() +
                     " do not match row width of " + tx.shape_str());
  }
  Tensor out(tx.shape);
  Tensor aux({m, n + 1});  // per row: x_hat[n], inv_std
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = tx.ptr() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    double* hat = aux.ptr() + r * (n + 1);
    double* yr = out.ptr() + r * n;
    for (std::size_t j = 0; j < n; ++j) {
      hat[j] = (xr[j] - mean) * inv_std;
      yr[j] = tg.data[j] * hat[j] + tb.data[j];
    }
    hat[n] = inv_std;
  }
  Node node = make_op(std::move(out), {x, gamma, beta});
  node.aux = std::move(aux);
  node.backward_fn = [m, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const Tensor& gam = g.val(me.parents[1]);
    const bool need_x = g.wants_grad(me.parents[0]);
    const bool need_g = g.wants_grad(me.parents[1]);
    const bool need_b = g.wants_grad(me.parents[2]);
    Tensor* dx = need_x ? &g.grad_buffer(me.parents[0]) : nullptr;
    Tensor* dg = need_g ? &g.grad_buffer(me.parents[1]) : nullptr;
    Tensor* db = need_b ? &g.grad_buffer(me.parents[2]) : nullptr;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < m; ++r) {
      const double* go = me.grad.ptr() + r * n;
      const double* hat = me.aux.ptr() + r * (n + 1);
      const double inv_std = hat[n];
      if (need_g) {
        for (std::size_t j = 0; j < n; ++j) dg->data[j] += go[j] * hat[j];
      }
      if (need_b) {
        for (std::size_t j = 0; j < n; ++j) db->data[j] += go[j];
      }
      if (need_x) {
        double sum_dhat = 0.0, sum_dhat_hat = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dhat = go[j] * gam.data[j];
          sum_dhat += dhat;
          sum_dhat_hat += dhat * hat[j];
        }
        double* dxr = dx->ptr() + r * n;
        for (std::size_t j = 0; j < n; ++j) {
          const double dhat = go[j] * gam.data[j];
          dxr[j] += inv_std * (dhat - inv_n * sum_dhat - hat[j] * inv_n * sum_dhat_hat);
        }
      }
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::softmax_rows(Var x) {
  const Tensor& tx = value(x);
  const std::size_t m = tx.rows(), n = tx.cols();
  Tensor out(tx.shape);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = tx.ptr() + r * n;
    double* yr = out.ptr() + r * n;
    double mx = xr[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  Node node = make_op(std::move(out), {x});
  node.backward_fn = [m, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dx = g.grad_buffer(me.parents[0]);
    const Tensor& y = me.owned;
    for (std::size_t r = 0; r < m; ++r) {
      const double* yr = y.ptr() + r * n;
      const double* go = me.grad.ptr() + r * n;
      double dotv = 0.0;
      for (std::size_t j = 0; j < n; ++j) dotv += yr[j] * go[j];
      double* dxr = dx.ptr() + r * n;
      for (std::size_t j = 0; j < n; ++j) dxr[j] += yr[j] * (go[j] - dotv);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::causal_mha(Var qkv, std::size_t heads) {
  const Tensor& t = value(qkv);
  const std::size_t rows = t.rows();
  if (t.cols() % 3 != 0) {
    throw ShapeError("causal_mha: qkv width not divisible by 3, " + t.shape_str());
  }
  const std::size_t d = t.cols() / 3;
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("causal_mha: model dim " + std::to_string(d) +
                     " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t width = 3 * d;

  Tensor out({rows, d});
  Tensor attn({heads, rows, rows});  // lower-triangular, zeros elsewhere
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qoff = h * dh, koff = d + h * dh, voff = 2 * d + h * dh;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* qi = t.ptr() + i * width + qoff;
      double* arow = attn.ptr() + (h * rows + i) * rows;
      double mx = -1e300;
      for (std::size_t j = 0; j <= i; ++j) {
        const double s = kernels::active().dot(qi, t.ptr() + j * width + koff, dh) * scale;
        arow[j] = s;
        mx = std::max(mx, s);
      }
      double total = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        arow[j] = std::exp(arow[j] - mx);
        total += arow[j];
      }
      const double inv = 1.0 / total;
      double* orow = out.ptr() + i * d + h * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        arow[j] *= inv;
        kernels::active().axpy(arow[j], t.ptr() + j * width + voff, orow, dh);
      }
    }
  }
  Node node = make_op(std::move(out), {qkv});
  node.aux = std::move(attn);
  node.backward_fn = [rows, heads, d, dh, scale, width](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    const Tensor& t2 = g.val(me.parents[0]);
    Tensor& dqkv = g.grad_buffer(me.parents[0]);
    std::vector<double> ds(rows);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t qoff = h * dh, koff = d + h * dh, voff = 2 * d + h * dh;
      for (std::size_t i = 0; i < rows; ++i) {
        const double* arow = me.aux.ptr() + (h * rows + i) * rows;
        const double* dout = me.grad.ptr() + i * d + h * dh;
        double dot_a_da = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double da = kernels::active().dot(dout, t2.ptr() + j * width + voff, dh);
          kernels::active().axpy(arow[j], dout, dqkv.ptr() + j * width + voff, dh);
          ds[j] = da;
          dot_a_da += arow[j] * da;
        }
        const double* qi = t2.ptr() + i * width + qoff;
        double* dqi = dqkv.ptr() + i * width + qoff;
        for (std::size_t j = 0; j <= i; ++j) {
          const double dscore = arow[j] * (ds[j] - dot_a_da) * scale;
          kernels::active().axpy(dscore, t2.ptr() + j * width + koff, dqi, dh);
          kernels::active().axpy(dscore, qi, dqkv.ptr() + j * width + koff, dh);
        }
      }
    }
  };
  return Var{push(std::move(node))};
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

Var Graph::slice_rows(Var x, std::size_t r0, std::size_t r1) {
  const Tensor& tx = value(x);
  const std::size_t n = tx.cols();
  if (r1 > tx.rows() || r0 >= r1) {
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") out of " + tx.shape_str());
  }
  Tensor out({r1 - r0, n});
  std::memcpy(out.ptr(), tx.ptr() + r0 * n, out.size() * sizeof(double));
  Node node = make_op(std::move(out), {x});
  node.backward_fn = [r0, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dx = g.grad_buffer(me.parents[0]);
    kernels::active().axpy(1.0, me.grad.ptr(), dx.ptr() + r0 * n, me.grad.size());
  };
  return Var{push(std::move(node))};
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const std::size_t n = value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + value(p).shape_str());
    }
    rows += value(p).rows();
  }
  Tensor out({rows, n});
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t r = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    std::memcpy(out.ptr() + r * n, tp.ptr(), tp.size() * sizeof(double));
    ids.push_back(p.id);
    offsets.push_back(r * n);
    r += tp.rows();
  }
  Node node = make_op(std::move(out), {});
  for (Var p : parts) {
    if (wants_grad(p.id)) node.needs_grad = true;
  }
  node.parents[0] = ids[0];
  node.backward_fn = [ids, offsets](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.wants_grad(ids[i])) continue;
      Tensor& dp = g.grad_buffer(ids[i]);
      kernels::active().axpy(1.0, me.grad.ptr() + offsets[i], dp.ptr(), dp.size());
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t m = value(parts[0]).rows();
  std::size_t n = 0;
  for (Var p : parts) {
    if (value(p).rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + value(p).shape_str());
    }
    n += value(p).cols();
  }
  Tensor out({m, n});
  std::vector<int> ids;
  std::vector<std::size_t> col_offsets, widths;
  std::size_t c = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    const std::size_t w = tp.cols();
    for (std::size_t r = 0; r < m; ++r) {
      std::memcpy(out.ptr() + r * n + c, tp.ptr() + r * w, w * sizeof(double));
    }
    ids.push_back(p.id);
    col_offsets.push_back(c);
    widths.push_back(w);
    c += w;
  }
  Node node = make_op(std::move(out), {});
  for (Var p : parts) {
    if (wants_grad(p.id)) node.needs_grad = true;
  }
  node.parents[0] = ids[0];
  node.backward_fn = [ids, col_offsets, widths, m, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.wants_grad(ids[i])) continue;
      Tensor& dp = g.grad_buffer(ids[i]);
      const std::size_t w = widths[i];
      for (std::size_t r = 0; r < m; ++r) {
        kernels::active().axpy(1.0, me.grad.ptr() + r * n + col_offsets[i], dp.ptr() + r * w, w);
      }
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::gather_rows(Var table, std::vector<std::size_t> indices) {
  const Tensor& tt = value(table);
  const std::size_t n = tt.cols();
  Tensor out({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tt.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of " + tt.shape_str());
    }
    std::memcpy(out.ptr() + i * n, tt.ptr() + indices[i] * n, n * sizeof(double));
  }
  Node node = make_op(std::move(out), {table});
  node.backward_fn = [indices = std::move(indices), n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dt = g.grad_buffer(me.parents[0]);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      kernels::active().axpy(1.0, me.grad.ptr() + i * n, dt.ptr() + indices[i] * n, n);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::mean_rows(Var x) {
  const Tensor& tx = value(x);
  const std::size_t m = tx.rows(), n = tx.cols();
  Tensor out({1, n});
  for (std::size_t r = 0; r < m; ++r) {
    kernels::active().axpy(1.0, tx.ptr() + r * n, out.ptr(), n);
  }
  kernels::active().scale(1.0 / static_cast<double>(m), out.ptr(), n);
  Node node = make_op(std::move(out), {x});
  node.backward_fn = [m, n](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dx = g.grad_buffer(me.parents[0]);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      kernels::active().axpy(inv, me.grad.ptr(), dx.ptr() + r * n, n);
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::reshape(Var x, std::vector<std::size_t> dims) {
  const Tensor& tx = value(x);
  std::size_t total = 1;
  for (std::size_t d : dims) total *= d;
  if (total != tx.size()) {
    throw ShapeError("reshape: cannot view " + tx.shape_str() + " as " + shape_to_string(dims));
  }
  Tensor out;
  out.shape = std::move(dims);
  out.data = tx.data;
  Node node = make_op(std::move(out), {x});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dx = g.grad_buffer(me.parents[0]);
    kernels::active().axpy(1.0, me.grad.ptr(), dx.ptr(), dx.size());
  };
  return Var{push(std::move(node))};
}

Var Graph::node_readout(Var features, Var weights, Var bias, std::size_t out_dim) {
  const Tensor& tf = value(features);
  const Tensor& tw = value(weights);
  const Tensor& tb = value(bias);
  const std::size_t nodes = tf.rows(), dn = tf.cols();
  if (tw.rows() != nodes || tw.cols() != dn * out_dim || tb.rows() != nodes || tb.cols() != out_dim) {
    throw ShapeError("node_readout: weights " + tw.shape_str() + " bias " + tb.shape_str() +
                     " do not fit features " + tf.shape_str());
  }
  Tensor out({nodes, out_dim});
  for (std::size_t i = 0; i < nodes; ++i) {
    kernels::active().matmul_nn(tf.ptr() + i * dn, tw.ptr() + i * dn * out_dim,
                                out.ptr() + i * out_dim, 1, dn, out_dim);
    kernels::active().axpy(1.0, tb.ptr() + i * out_dim, out.ptr() + i * out_dim, out_dim);
  }
  Node node = make_op(std::move(out), {features, weights, bias});
  node.backward_fn = [nodes, dn, out_dim](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const Tensor& tf2 = g.val(me.parents[0]);
    const Tensor& tw2 = g.val(me.parents[1]);
    const bool need_f = g.wants_grad(me.parents[0]);
    const bool need_w = g.wants_grad(me.parents[1]);
    const bool need_b = g.wants_grad(me.parents[2]);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double* go = me.grad.ptr() + i * out_dim;
      if (need_f) {
        kernels::active().matmul_nt(go, tw2.ptr() + i * dn * out_dim,
                                    g.grad_buffer(me.parents[0]).ptr() + i * dn, 1, out_dim, dn);
      }
      if (need_w) {
        kernels::active().matmul_tn(tf2.ptr() + i * dn, go,
                                    g.grad_buffer(me.parents[1]).ptr() + i * dn * out_dim,
                                    1, dn, out_dim);
      }
      if (need_b) {
        kernels::active().axpy(1.0, go, g.grad_buffer(me.parents[2]).ptr() + i * out_dim, out_dim);
      }
    }
  };
  return Var{push(std::move(node))};
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

Var Graph::mse(Var pred, Var target) {
  const Tensor& tp = value(pred);
  const Tensor& tt = value(target);
  require_same_shape(tp, tt, "mse");
  Tensor out({1});
  out.data[0] = mse_value(tp, tt);
  Node node = make_op(std::move(out), {pred, target});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    const Tensor& tp2 = g.val(me.parents[0]);
    const Tensor& tt2 = g.val(me.parents[1]);
    const double coeff = 2.0 * me.grad.data[0] / static_cast<double>(tp2.size());
    if (g.wants_grad(me.parents[0])) {
      Tensor& dp = g.grad_buffer(me.parents[0]);
      for (std::size_t i = 0; i < tp2.size(); ++i) {
        dp.data[i] += coeff * (tp2.data[i] - tt2.data[i]);
      }
    }
    if (g.wants_grad(me.parents[1])) {
      Tensor& dt = g.grad_buffer(me.parents[1]);
      for (std::size_t i = 0; i < tp2.size(); ++i) {
        dt.data[i] -= coeff * (tp2.data[i] - tt2.data[i]);
      }
    }
  };
  return Var{push(std::move(node))};
}

Var Graph::sum_all(Var x) {
  const Tensor& tx = value(x);
  Tensor out({1});
  double acc = 0.0;
  for (double v : tx.data) acc += v;
  out.data[0] = acc;
  Node node = make_op(std::move(out), {x});
  node.backward_fn = [](Graph& g, int self) {
    const Node& me = g.nodes_[self];
    if (!g.wants_grad(me.parents[0])) return;
    Tensor& dx = g.grad_buffer(me.parents[0]);
    const double gv = me.grad.data[0];
    for (double& v : dx.data) v += gv;
  };
  return Var{push(std::move(node))};
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Graph::backward(Var loss) {
  run_backward(loss, nullptr);
}

void Graph::backward(Var loss, GradBuffer& buffer) {
  run_backward(loss, &buffer);
}

void Graph::run_backward(Var loss, GradBuffer* sink_buffer) {
  const Tensor& lt = value(loss);
  if (lt.size() != 1) {
    throw Error("backward: loss must be scalar, got " + lt.shape_str());
  }
  grad_buffer(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) continue;  // not on the loss path
    if (n.leaf.valid()) {
      if (n.needs_grad) {
        if (sink_buffer != nullptr) {
          kernels::active().axpy(1.0, n.grad.ptr(), sink_buffer->grad(n.leaf).ptr(), n.grad.size());
        } else {
          kernels::active().axpy(1.0, n.grad.ptr(), store_->param(n.leaf).grad.ptr(), n.grad.size());
        }
      }
      continue;
    }
    if (!n.needs_grad || !n.backward_fn) continue;
    n.backward_fn(*this, id);
  }
}

}  // namespace arvrm
