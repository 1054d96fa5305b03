#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/tensor.hpp"

namespace gsrnn {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Reverse-mode differentiation over a recorded sequence of batched matrix ops.
//
// Every value is a [batch x width] matrix (rank-1 params are treated as one
// row). Ops are appended in evaluation order, so reverse insertion order is a
// valid topological order for the backward sweep. Rows never mix: an op's
// output row b depends only on row b of its inputs (combine_blocks maps row r
// of an input block to row r of an output block), and each output element is
// accumulated in a fixed order, so results do not depend on the batch size.
class Tape {
 public:
  enum class Op { constant, param, linear, concat, sigmoid, tanh, mul, add, scale, sq_error_sum, sum,
                  combine_blocks };

  Tape() { nodes_.reserve(1024); }

  Var constant(Tensor value) { return push(Op::constant, {}, std::move(value), false); }

  // Registers a trainable tensor. Binding the same name twice returns the
  // same Var, so every use of a shared tensor accumulates into one gradient.
  Var param(const std::string& name, const Tensor& value) {
    auto it = params_.find(name);
    if (it != params_.end()) return it->second;
    Var v = push(Op::param, {}, value, true);
    params_.emplace(name, v);
    return v;
  }

  // x [B x K] times W^T for W [O x K], plus an optional bias of length O.
  Var linear(Var x, Var w, Var bias) { return linear_impl(x, w, &bias); }
  Var linear(Var x, Var w) { return linear_impl(x, w, nullptr); }

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw structural_error("concat of zero tensors");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t width = 0;
    bool grad = false;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw structural_error("concat: row count mismatch");
      width += value(p).cols();
      grad = grad || nodes_[p.id].requires_grad;
    }
    Tensor out = Tensor::matrix(rows, width);
    std::size_t offset = 0;
    for (Var p : parts) {
      const Tensor& in = value(p);
      const std::size_t w = in.cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(r, offset + c) = in.at(r, c);
      offset += w;
    }
    std::vector<std::size_t> ids;
    ids.reserve(parts.size());
    for (Var p : parts) ids.push_back(p.id);
    return push(Op::concat, std::move(ids), std::move(out), grad);
  }

  Var sigmoid(Var a) {
    Tensor out = as_matrix(value(a));
    for (double& v : out.values()) v = logistic(v);
    return push(Op::sigmoid, {a.id}, std::move(out), nodes_[a.id].requires_grad);
  }

  Var tanh(Var a) {
    Tensor out = as_matrix(value(a));
    for (double& v : out.values()) v = std::tanh(v);
    return push(Op::tanh, {a.id}, std::move(out), nodes_[a.id].requires_grad);
  }

  Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Tensor out = as_matrix(value(a));
    const Tensor& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return push(Op::mul, {a.id, b.id}, std::move(out),
                nodes_[a.id].requires_grad || nodes_[b.id].requires_grad);
  }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Tensor out = as_matrix(value(a));
    const Tensor& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return push(Op::add, {a.id, b.id}, std::move(out),
                nodes_[a.id].requires_grad || nodes_[b.id].requires_grad);
  }

  Var scale(Var a, double c) {
    Tensor out = as_matrix(value(a));
    for (double& v : out.values()) v *= c;
    Var r = push(Op::scale, {a.id}, std::move(out), nodes_[a.id].requires_grad);
    nodes_[r.id].coeff = c;
    return r;
  }

  // Sum over all entries of (a - target)^2, as a [1 x 1] value.
  Var sq_error_sum(Var a, const Tensor& target) {
    const Tensor& av = value(a);
    if (av.size() != target.size())
      throw structural_error("sq_error_sum: prediction/target size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - target[i];
      s += d * d;
    }
    Var r = push(Op::sq_error_sum, {a.id}, Tensor::matrix(1, 1, s), nodes_[a.id].requires_grad);
    nodes_[r.id].aux = target;
    return r;
  }

  // Sum over all entries, as a [1 x 1] value.
  Var sum(Var a) {
    double s = 0.0;
    for (double v : value(a).values()) s += v;
    return push(Op::sum, {a.id}, Tensor::matrix(1, 1, s), nodes_[a.id].requires_grad);
  }

  // Views `a` as consecutive blocks of `block_rows` rows. Output block g is
  // sum over (k, w) in groups[g] of w * block k, accumulated in list order;
  // an empty group yields zeros.
  Var combine_blocks(Var a, std::size_t block_rows, std::vector<std::vector<std::pair<std::size_t, double>>> groups) {
    const Tensor& av = value(a);
    const std::size_t cols = av.cols();
    if (block_rows == 0 || av.rows() % block_rows != 0)
      throw structural_error("combine_blocks: row count is not a multiple of the block size");
    const std::size_t blocks = av.rows() / block_rows;
    const std::size_t span = block_rows * cols;
    Tensor out = Tensor::matrix(groups.size() * block_rows, cols);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double* o = out.data() + g * span;
      for (const auto& [k, w] : groups[g]) {
        if (k >= blocks) throw structural_error("combine_blocks: block index out of range");
        const double* in = av.data() + k * span;
        for (std::size_t i = 0; i < span; ++i) o[i] += w * in[i];
      }
    }
    Var r = push(Op::combine_blocks, {a.id}, std::move(out), nodes_[a.id].requires_grad);
    nodes_[r.id].groups = std::move(groups);
    nodes_[r.id].block_rows = block_rows;
    return r;
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }

  // Gradient of the last backward() root with respect to v; zeros if v was unreachable.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
  }

  const std::map<std::string, Var>& params() const { return params_; }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var root) {
    if (value(root).size() != 1) throw structural_error("backward root must be a scalar");
    for (Node& n : nodes_) n.grad = Tensor();
    nodes_[root.id].grad = Tensor::matrix(1, 1, 1.0);
    for (std::size_t k = root.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (n.grad.empty() || !n.requires_grad) continue;
      propagate(n);
    }
  }

  // Index and op of the first recorded value containing a non-finite entry, or -1.
  std::ptrdiff_t first_non_finite() const {
    for (std::size_t k = 0; k < nodes_.size(); ++k)
      if (!nodes_[k].value.all_finite()) return static_cast<std::ptrdiff_t>(k);
    return -1;
  }

  static const char* op_name(Op op) {
    switch (op) {
      case Op::constant: return "constant";
      case Op::param: return "param";
      case Op::linear: return "linear";
      case Op::concat: return "concat";
      case Op::sigmoid: return "sigmoid";
      case Op::tanh: return "tanh";
      case Op::mul: return "mul";
      case Op::add: return "add";
      case Op::scale: return "scale";
      case Op::sq_error_sum: return "sq_error_sum";
      case Op::sum: return "sum";
      case Op::combine_blocks: return "combine_blocks";
    }
    return "?";
  }

  Op op(Var v) const { return nodes_.at(v.id).op; }

  static double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;  // empty until reached by backward()
    Tensor aux;   // sq_error_sum target
    double coeff = 0.0;
    bool requires_grad = false;
    std::vector<std::vector<std::pair<std::size_t, double>>> groups;  // combine_blocks
    std::size_t block_rows = 0;
  };

  static Tensor as_matrix(const Tensor& t) {
    if (t.rank() == 2) return t;
    return Tensor({t.rows(), t.cols()}, std::vector<double>(t.values().begin(), t.values().end()));
  }

  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, bool requires_grad) {
    if (value.rank() != 2) value = as_matrix(value);
    nodes_.push_back(
        Node{op, std::move(inputs), std::move(value), Tensor(), Tensor(), 0.0, requires_grad, {}, 0});
    return Var{nodes_.size() - 1};
  }

  void require_same_shape(Var a, Var b, const char* what) const {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.rows() != y.rows() || x.cols() != y.cols())
      throw structural_error(std::string(what) + ": shape mismatch " + shape_string(x.shape()) +
                             " vs " + shape_string(y.shape()));
  }

  Var linear_impl(Var x, Var w, const Var* bias) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const std::size_t batch = xv.rows();
    const std::size_t in = xv.cols();
    const std::size_t out = wv.rows();
    if (wv.cols() != in)
      throw structural_error("linear: input width " + std::to_string(in) +
                             " does not match weight " + shape_string(wv.shape()));
    if (bias && value(*bias).size() != out)
      throw structural_error("linear: bias length does not match weight rows");

    // W^T so the inner loop runs over contiguous outputs.
    std::vector<double> wt(in * out);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t k = 0; k < in; ++k) wt[k * out + o] = wv.at(o, k);

    Tensor y = Tensor::matrix(batch, out);
    for (std::size_t b = 0; b < batch; ++b) {
      double* yr = y.data() + b * out;
      if (bias) {
        const Tensor& bv = value(*bias);
        for (std::size_t o = 0; o < out; ++o) yr[o] = bv[o];
      }
      const double* xr = xv.data() + b * in;
      for (std::size_t k = 0; k < in; ++k) {
        const double xk = xr[k];
        const double* wr = wt.data() + k * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] += xk * wr[o];
      }
    }
    std::vector<std::size_t> ids{x.id, w.id};
    bool grad = nodes_[x.id].requires_grad || nodes_[w.id].requires_grad;
    if (bias) {
      ids.push_back(bias->id);
      grad = grad || nodes_[bias->id].requires_grad;
    }
    return push(Op::linear, std::move(ids), std::move(y), grad);
  }

  Tensor& grad_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void propagate(const Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::constant:
      case Op::param:
        return;
      case Op::linear: {
        const Tensor& xv = nodes_[n.inputs[0]].value;
        const Tensor& wv = nodes_[n.inputs[1]].value;
        const std::size_t batch = xv.rows();
        const std::size_t in = xv.cols();
        const std::size_t out = wv.rows();
        if (nodes_[n.inputs[0]].requires_grad) {
          Tensor& dx = grad_of(n.inputs[0]);
          for (std::size_t b = 0; b < batch; ++b) {
            double* dxr = dx.data() + b * in;
            const double* gr = g.data() + b * out;
            for (std::size_t o = 0; o < out; ++o) {
              const double go = gr[o];
              const double* wr = wv.data() + o * in;
              for (std::size_t k = 0; k < in; ++k) dxr[k] += go * wr[k];
            }
          }
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          Tensor& dw = grad_of(n.inputs[1]);
          for (std::size_t b = 0; b < batch; ++b) {
            const double* xr = xv.data() + b * in;
            const double* gr = g.data() + b * out;
            for (std::size_t o = 0; o < out; ++o) {
              const double go = gr[o];
              double* dwr = dw.data() + o * in;
              for (std::size_t k = 0; k < in; ++k) dwr[k] += go * xr[k];
            }
          }
        }
        if (n.inputs.size() == 3 && nodes_[n.inputs[2]].requires_grad) {
          Tensor& db = grad_of(n.inputs[2]);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) db[o] += g.at(b, o);
        }
        return;
      }
      case Op::concat: {
        std::size_t offset = 0;
        for (std::size_t id : n.inputs) {
          const std::size_t w = nodes_[id].value.cols();
          if (nodes_[id].requires_grad) {
            Tensor& d = grad_of(id);
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < w; ++c) d.at(r, c) += g.at(r, offset + c);
          }
          offset += w;
        }
        return;
      }
      case Op::sigmoid: {
        Tensor& d = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.value[i];
          d[i] += g[i] * s * (1.0 - s);
        }
        return;
      }
      case Op::tanh: {
        Tensor& d = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = n.value[i];
          d[i] += g[i] * (1.0 - t * t);
        }
        return;
      }
      case Op::mul: {
        const Tensor& av = nodes_[n.inputs[0]].value;
        const Tensor& bv = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].requires_grad) {
          Tensor& d = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          Tensor& d = grad_of(n.inputs[1]);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
        }
        return;
      }
      case Op::add: {
        for (std::size_t id : n.inputs) {
          if (!nodes_[id].requires_grad) continue;
          Tensor& d = grad_of(id);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        return;
      }
      case Op::scale: {
        Tensor& d = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.coeff;
        return;
      }
      case Op::sq_error_sum: {
        const Tensor& av = nodes_[n.inputs[0]].value;
        Tensor& d = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < av.size(); ++i) d[i] += g[0] * 2.0 * (av[i] - n.aux[i]);
        return;
      }
      case Op::sum: {
        Tensor& d = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
        return;
      }
      case Op::combine_blocks: {
        Tensor& d = grad_of(n.inputs[0]);
        const std::size_t span = n.block_rows * g.cols();
        for (std::size_t k = 0; k < n.groups.size(); ++k) {
          const double* go = g.data() + k * span;
          for (const auto& [b, w] : n.groups[k]) {
            double* di = d.data() + b * span;
            for (std::size_t i = 0; i < span; ++i) di[i] += w * go[i];
          }
        }
        return;
      }
    }
  }

  std::vector<Node> nodes_;
  std::map<std::string, Var> params_;
};

// Binds every tensor of `params` onto the tape under its own name.
inline std::map<std::string, Var> bind_params(Tape& tape, const ParamSet& params) {
  std::map<std::string, Var> vars;
  for (const auto& [name, e] : params) vars.emplace(name, tape.param(name, e.tensor));
  return vars;
}

// Collects gradients for the bound params (in the shapes of `like`).
inline ParamSet collect_grads(const Tape& tape, const ParamSet& like) {
  ParamSet out;
  for (const auto& [name, e] : like) {
    auto it = tape.params().find(name);
    Tensor g = it == tape.params().end() ? Tensor(e.tensor.shape()) : tape.grad(it->second);
    g = Tensor(e.tensor.shape(), std::vector<double>(g.values().begin(), g.values().end()));
    if (!g.all_finite()) throw numeric_error("non-finite gradient for tensor '" + name + "'");
    out.add(name, std::move(g), e.kind);
  }
  return out;
}

// Reverse-mode gradient of a scalar loss built on a fresh tape.
// `build` receives the tape and the bound param Vars and returns the loss Var.
template <class BuildLoss>
ParamSet bptt(const ParamSet& params, BuildLoss&& build, double* loss_value = nullptr) {
  Tape tape;
  const auto vars = bind_params(tape, params);
  const Var loss = build(tape, vars);
  const double l = tape.value(loss)[0];
  if (!std::isfinite(l)) {
    const auto bad = tape.first_non_finite();
    std::string where = bad < 0 ? std::string("loss")
                                : std::string("tape value #") + std::to_string(bad) + " (" +
                                      Tape::op_name(tape.op(Var{static_cast<std::size_t>(bad)})) +
                                      ")";
    for (const auto& [name, v] : vars)
      if (!tape.value(v).all_finite()) where = "parameter '" + name + "'";
    throw numeric_error("non-finite intermediate at " + where);
  }
  if (loss_value) *loss_value = l;
  tape.backward(loss);
  return collect_grads(tape, params);
}

}  // namespace gsrnn
