#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/rng.hpp"
#include "gsrnn/tape.hpp"
#include "gsrnn/tensor.hpp"

namespace gsrnn {

// ---------------------------------------------------------------------------
// Vanilla RNN cell:  h_t = tanh(b + W h_{t-1} + U x_t),  y_t = tanh(V h_t + c)
// ---------------------------------------------------------------------------

struct RNNCellParams {
  Tensor W;  // hidden x hidden
  Tensor U;  // hidden x input
  Tensor V;  // output x hidden
  Tensor b;  // hidden
  Tensor c;  // output

  std::size_t hidden() const { return W.rows(); }
  std::size_t input() const { return U.cols(); }
  std::size_t output() const { return V.rows(); }

  void validate() const {
    const std::size_t h = hidden();
    if (W.rank() != 2 || U.rank() != 2 || V.rank() != 2 || W.cols() != h || U.rows() != h ||
        V.cols() != h || b.size() != h || c.size() != V.rows())
      throw structural_error("RNNCellParams: inconsistent dimensions");
  }
};

struct RNNStep {
  std::vector<double> h;
  std::vector<double> y;
};

inline RNNStep rnn_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                const RNNCellParams& p) {
  p.validate();
  const std::size_t H = p.hidden();
  if (x.size() != p.input() || h_prev.size() != H)
    throw structural_error("rnn_cell_forward: input/hidden size mismatch");
  RNNStep out{std::vector<double>(H), std::vector<double>(p.output())};
  for (std::size_t i = 0; i < H; ++i) {
    double a = p.b[i];
    for (std::size_t j = 0; j < H; ++j) a += p.W.at(i, j) * h_prev[j];
    for (std::size_t j = 0; j < x.size(); ++j) a += p.U.at(i, j) * x[j];
    out.h[i] = std::tanh(a);
  }
  for (std::size_t o = 0; o < p.output(); ++o) {
    double a = p.c[o];
    for (std::size_t j = 0; j < H; ++j) a += p.V.at(o, j) * out.h[j];
    out.y[o] = std::tanh(a);
  }
  return out;
}

// d h_t / d h_{t-1} = diag(1 - h_t^2) W, evaluated at the step's output h_t.
inline Tensor rnn_state_jacobian(const RNNCellParams& p, std::span<const double> h_t) {
  const std::size_t H = p.hidden();
  Tensor j = Tensor::matrix(H, H);
  for (std::size_t r = 0; r < H; ++r) {
    const double d = 1.0 - h_t[r] * h_t[r];
    for (std::size_t c = 0; c < H; ++c) j.at(r, c) = d * p.W.at(r, c);
  }
  return j;
}

// ---------------------------------------------------------------------------
// LSTM cell with one fused weight per gate acting on [h_{t-1}, x_t]:
//   f, i, o = sigmoid(W_g [h, x] + b_g),  C~ = tanh(W_C [h, x] + b_C)
//   C_t = f * C_{t-1} + i * C~,  h_t = o * tanh(C_t)
// ---------------------------------------------------------------------------

struct LSTMCellParams {
  Tensor w_f, w_i, w_o, w_c;  // hidden x (hidden + input)
  Tensor b_f, b_i, b_o, b_c;  // hidden

  std::size_t hidden() const { return w_f.rows(); }
  std::size_t input() const { return w_f.cols() - w_f.rows(); }

  static LSTMCellParams zeros(std::size_t input, std::size_t hidden) {
    const Tensor w = Tensor::matrix(hidden, hidden + input);
    const Tensor b({hidden});
    return {w, w, w, w, b, b, b, b};
  }

  void validate() const {
    const std::size_t h = hidden();
    for (const Tensor* w : {&w_f, &w_i, &w_o, &w_c})
      if (w->rank() != 2 || w->rows() != h || w->cols() != w_f.cols() || w_f.cols() <= h)
        throw structural_error("LSTMCellParams: gate weights must share shape hidden x (hidden+input)");
    for (const Tensor* b : {&b_f, &b_i, &b_o, &b_c})
      if (b->size() != h) throw structural_error("LSTMCellParams: bias length must equal hidden");
  }
};

// Gate tensors of one LSTM layer bound on a tape.
struct BoundLSTMCell {
  Var w_f, w_i, w_o, w_c;
  Var b_f, b_i, b_o, b_c;
};

// One LSTM step on the tape; returns (h_t, C_t).
inline std::pair<Var, Var> lstm_cell(Tape& tape, const BoundLSTMCell& cell, Var x, Var h_prev,
                                     Var c_prev) {
  const Var hx = tape.concat({h_prev, x});
  const Var f = tape.sigmoid(tape.linear(hx, cell.w_f, cell.b_f));
  const Var i = tape.sigmoid(tape.linear(hx, cell.w_i, cell.b_i));
  const Var o = tape.sigmoid(tape.linear(hx, cell.w_o, cell.b_o));
  const Var g = tape.tanh(tape.linear(hx, cell.w_c, cell.b_c));
  const Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

struct LSTMStep {
  std::vector<double> h;
  std::vector<double> c;
};

inline LSTMStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                  std::span<const double> c_prev, const LSTMCellParams& p) {
  p.validate();
  const std::size_t H = p.hidden();
  if (x.size() != p.input() || h_prev.size() != H || c_prev.size() != H)
    throw structural_error("lstm_cell_forward: input/state size mismatch");
  Tape tape;
  auto row = [](std::span<const double> v) {
    return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
  };
  const BoundLSTMCell cell{tape.constant(p.w_f), tape.constant(p.w_i), tape.constant(p.w_o),
                           tape.constant(p.w_c), tape.constant(p.b_f), tape.constant(p.b_i),
                           tape.constant(p.b_o), tape.constant(p.b_c)};
  const auto [h, c] =
      lstm_cell(tape, cell, tape.constant(row(x)), tape.constant(row(h_prev)), tape.constant(row(c_prev)));
  const auto hv = tape.value(h).values();
  const auto cv = tape.value(c).values();
  return {{hv.begin(), hv.end()}, {cv.begin(), cv.end()}};
}

// ---------------------------------------------------------------------------
// Multi-layer LSTM with an optional affine readout on the top hidden state.
// The stack is a named view into a ParamSet: its tensors live under `prefix`.
// ---------------------------------------------------------------------------

struct LSTMStack {
  std::string prefix;
  std::size_t input = 1;
  std::vector<std::size_t> hidden;  // one entry per layer, bottom first
  std::size_t output = 0;           // 0: no readout, the stack yields its top hidden state

  std::size_t layers() const { return hidden.size(); }
  std::size_t top_hidden() const { return hidden.back(); }
  std::size_t layer_input(std::size_t l) const { return l == 0 ? input : hidden[l - 1]; }

  std::string gate_name(std::size_t layer, const char* tensor) const {
    return prefix + ".l" + std::to_string(layer) + "." + tensor;
  }
  std::string readout_weight() const { return prefix + ".out.W"; }
  std::string readout_bias() const { return prefix + ".out.b"; }

  void validate() const {
    if (hidden.empty()) throw structural_error("LSTMStack '" + prefix + "' has no layers");
    if (input == 0) throw structural_error("LSTMStack '" + prefix + "' has zero input width");
    for (std::size_t h : hidden)
      if (h == 0) throw structural_error("LSTMStack '" + prefix + "' has a zero-width layer");
  }
};

inline constexpr const char* kGateWeights[] = {"W_f", "W_i", "W_o", "W_c"};
inline constexpr const char* kGateBiases[] = {"b_f", "b_i", "b_o", "b_c"};

// Adds the stack's tensors to `params`: matrices uniform in +-1/sqrt(fan_in), biases zero.
inline void init_stack(ParamSet& params, const LSTMStack& s, SplitMix64& rng) {
  s.validate();
  for (std::size_t l = 0; l < s.layers(); ++l) {
    const std::size_t h = s.hidden[l];
    const std::size_t fan_in = h + s.layer_input(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (const char* w : kGateWeights) {
      Tensor t = Tensor::matrix(h, fan_in);
      for (double& v : t.values()) v = rng.uniform(-bound, bound);
      params.add(s.gate_name(l, w), std::move(t), ParamKind::matrix);
    }
    for (const char* b : kGateBiases) params.add(s.gate_name(l, b), Tensor({h}), ParamKind::bias);
  }
  if (s.output > 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.top_hidden()));
    Tensor w = Tensor::matrix(s.output, s.top_hidden());
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    params.add(s.readout_weight(), std::move(w), ParamKind::matrix);
    params.add(s.readout_bias(), Tensor({s.output}), ParamKind::bias);
  }
}

inline LSTMCellParams cell_params(const ParamSet& params, const LSTMStack& s, std::size_t layer) {
  LSTMCellParams p{params[s.gate_name(layer, "W_f")], params[s.gate_name(layer, "W_i")],
                   params[s.gate_name(layer, "W_o")], params[s.gate_name(layer, "W_c")],
                   params[s.gate_name(layer, "b_f")], params[s.gate_name(layer, "b_i")],
                   params[s.gate_name(layer, "b_o")], params[s.gate_name(layer, "b_c")]};
  p.validate();
  return p;
}

inline BoundLSTMCell bind_cell(Tape& tape, const ParamSet& params, const LSTMStack& s,
                               std::size_t l) {
  auto p = [&](const char* t) {
    const std::string name = s.gate_name(l, t);
    return tape.param(name, params[name]);
  };
  return {p("W_f"), p("W_i"), p("W_o"), p("W_c"), p("b_f"), p("b_i"), p("b_o"), p("b_c")};
}

struct StackRun {
  std::vector<Var> top_hidden;  // per step
  Var readout;                  // valid only when the stack has a readout
};

// Runs the stack over `seq` (each entry [batch x input]) from zero state.
inline StackRun run_stack(Tape& tape, const ParamSet& params, const LSTMStack& s,
                          const std::vector<Var>& seq) {
  s.validate();
  if (seq.empty()) throw structural_error("stack '" + s.prefix + "': empty input sequence");
  const std::size_t batch = tape.value(seq.front()).rows();
  for (Var x : seq)
    if (tape.value(x).cols() != s.input || tape.value(x).rows() != batch)
      throw structural_error("stack '" + s.prefix + "': input width " +
                             std::to_string(tape.value(x).cols()) + " but stack expects " +
                             std::to_string(s.input));

  std::vector<BoundLSTMCell> cells;
  std::vector<Var> h, c;
  for (std::size_t l = 0; l < s.layers(); ++l) {
    cells.push_back(bind_cell(tape, params, s, l));
    h.push_back(tape.constant(Tensor::matrix(batch, s.hidden[l])));
    c.push_back(h.back());
  }
  StackRun run;
  for (Var x : seq) {
    Var in = x;
    for (std::size_t l = 0; l < s.layers(); ++l) {
      std::tie(h[l], c[l]) = lstm_cell(tape, cells[l], in, h[l], c[l]);
      in = h[l];
    }
    run.top_hidden.push_back(in);
  }
  if (s.output > 0) {
    const Var w = tape.param(s.readout_weight(), params[s.readout_weight()]);
    const Var b = tape.param(s.readout_bias(), params[s.readout_bias()]);
    run.readout = tape.linear(run.top_hidden.back(), w, b);
  }
  return run;
}

struct StackOutput {
  std::vector<std::vector<double>> top_hidden;  // per step
  std::vector<double> readout;
};

// Single-sample forward pass of a stack (read-only on `params`).
inline StackOutput stack_forward(const std::vector<std::vector<double>>& seq,
                                 const ParamSet& params, const LSTMStack& s) {
  if (seq.empty()) throw structural_error("stack_forward: empty sequence");
  Tape tape;
  std::vector<Var> xs;
  for (const auto& x : seq) xs.push_back(tape.constant(Tensor({1, x.size()}, x)));
  const StackRun run = run_stack(tape, params, s, xs);
  StackOutput out;
  for (Var h : run.top_hidden) {
    auto v = tape.value(h).values();
    out.top_hidden.emplace_back(v.begin(), v.end());
  }
  if (s.output > 0) {
    auto v = tape.value(run.readout).values();
    out.readout.assign(v.begin(), v.end());
  }
  return out;
}

// Batched forward: seq[step] is [batch x input]; returns the readout [batch x output].
inline Tensor stack_forward_batch(const std::vector<Tensor>& seq, const ParamSet& params,
                                  const LSTMStack& s) {
  Tape tape;
  std::vector<Var> xs;
  for (const auto& x : seq) xs.push_back(tape.constant(x));
  const StackRun run = run_stack(tape, params, s, xs);
  return s.output > 0 ? tape.value(run.readout) : tape.value(run.top_hidden.back());
}

}  // namespace gsrnn
