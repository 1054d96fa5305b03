#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gsrnn/adam.hpp"
#include "gsrnn/errors.hpp"
#include "gsrnn/graph.hpp"
#include "gsrnn/panel.hpp"
#include "gsrnn/regularization.hpp"
#include "gsrnn/rng.hpp"
#include "gsrnn/rnn.hpp"
#include "gsrnn/tape.hpp"

namespace gsrnn {

struct GSRNNArch {
  std::size_t look_back = 2;
  std::vector<std::size_t> edge_hidden{40};
  std::vector<std::size_t> node_hidden{10, 40, 10};

  void validate() const {
    if (look_back < 1) throw structural_error("look_back must be >= 1");
    if (edge_hidden.empty() || node_hidden.empty())
      throw structural_error("edge and node RNN specs must have at least one layer");
    for (std::size_t h : edge_hidden)
      if (h == 0) throw structural_error("zero-width edge RNN layer");
    for (std::size_t h : node_hidden)
      if (h == 0) throw structural_error("zero-width node RNN layer");
  }

  friend bool operator==(const GSRNNArch&, const GSRNNArch&) = default;
};

struct TrainConfig {
  std::size_t epochs = 500;
  double lr = 1e-3;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;      // sample shuffling
};

// What produced the current parameters.
struct TrainingInfo {
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t batch_size = 0;
  PenaltyConfig penalty;
  std::vector<double> loss_history;
  friend bool operator==(const TrainingInfo&, const TrainingInfo&) = default;
};

struct EdgeBinding {
  TypedEdge edge;
  double input_scale = 1.0;  // alpha_ij applied to the neighbor feature
};

// Graph-structured RNN: one shared edge LSTM per edge type, one shared node
// LSTM (with scalar readout) per node class.
class GSRNNModel {
 public:
  GSRNNArch arch;
  RegionGraph graph;
  ClassAssignment classes;
  std::vector<EdgeBinding> edges;  // directed, in graph order
  std::map<EdgeType, LSTMStack> edge_pools;
  std::vector<LSTMStack> node_pools;  // indexed by class
  Scaler scaler;
  ParamSet params;
  std::uint64_t seed = 0;
  TrainingInfo training;

  int node_count() const { return graph.node_count(); }

  const LSTMStack& edge_stack_for(int src, int dst) const {
    for (const EdgeBinding& b : edges)
      if (b.edge.src == src && b.edge.dst == dst) return edge_pools.at(b.edge.type);
    throw structural_error("no edge " + std::to_string(src) + "->" + std::to_string(dst));
  }

  const LSTMStack& node_stack_for(int node) const { return node_pools.at(classes(node)); }

  // Edge types present in the graph with `cls` at one end, in type order.
  std::vector<EdgeType> incident_types(int cls) const {
    std::vector<EdgeType> out;
    for (const auto& [type, _] : edge_pools)
      if (type.touches(cls)) out.push_back(type);
    return out;
  }

  std::size_t edge_hidden() const { return arch.edge_hidden.back(); }
};

inline std::string edge_pool_name(EdgeType t, int classes) { return "edge." + t.label(classes); }
inline std::string node_pool_name(int cls) { return "node.c" + std::to_string(cls); }

// Allocates and initializes the shared pools. `graph` should already be normalized.
inline GSRNNModel build_model(const RegionGraph& graph, const ClassAssignment& assign,
                              const GSRNNArch& arch, std::uint64_t seed) {
  arch.validate();
  if (assign.node_count() != static_cast<std::size_t>(graph.node_count()))
    throw structural_error("class assignment does not cover the graph");
  for (int c = 0; c < assign.classes; ++c)
    if (assign.members(c).empty())
      throw structural_error("class " + std::to_string(c) + " has no nodes");
  for (int c : assign.of_node)
    if (c < 0 || c >= assign.classes) throw structural_error("class index out of range");

  GSRNNModel m;
  m.arch = arch;
  m.graph = graph;
  m.classes = assign;
  m.seed = seed;
  for (const TypedEdge& e : type_edges(graph, assign)) m.edges.push_back({e, e.weight});

  constexpr std::size_t feature_dim = 1;  // one activity value per look-back step
  for (const EdgeBinding& b : m.edges) {
    if (m.edge_pools.count(b.edge.type)) continue;
    m.edge_pools.emplace(b.edge.type, LSTMStack{edge_pool_name(b.edge.type, assign.classes),
                                                2 * feature_dim, arch.edge_hidden, 0});
  }
  for (int c = 0; c < assign.classes; ++c) {
    const std::size_t in = feature_dim + m.incident_types(c).size() * m.edge_hidden();
    m.node_pools.push_back(LSTMStack{node_pool_name(c), in, arch.node_hidden, 1});
  }

  // Pools initialize in name order from independent sub-streams of the seed.
  std::uint64_t salt = 1;
  for (const auto& [_, s] : m.edge_pools) {
    SplitMix64 rng(derive_seed(seed, salt++));
    init_stack(m.params, s, rng);
  }
  for (const auto& s : m.node_pools) {
    SplitMix64 rng(derive_seed(seed, salt++));
    init_stack(m.params, s, rng);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

// Per-node, per-incident-type weighted sums of final edge hidden states.
struct ForwardTrace {
  std::vector<std::map<EdgeType, Tensor>> aggregates;  // [node index][type] -> [batch x H]
};

// `windows[i]` is [batch x look_back] of scaled activity for node i+1, oldest
// step first. Returns one [batch x 1] prediction Var per node.
inline std::vector<Var> forward_on_tape(Tape& tape, const GSRNNModel& m, const ParamSet& params,
                                        const std::vector<Tensor>& windows,
                                        ForwardTrace* trace = nullptr) {
  const std::size_t n = static_cast<std::size_t>(m.node_count());
  const std::size_t steps = m.arch.look_back;
  if (windows.size() != n)
    throw structural_error("forward: expected windows for " + std::to_string(n) + " nodes, got " +
                           std::to_string(windows.size()));
  const std::size_t batch = windows.empty() ? 0 : windows[0].rows();
  for (const Tensor& w : windows)
    if (w.rows() != batch || w.cols() < steps)
      throw structural_error("forward: feature window shorter than look_back (" +
                             std::to_string(w.cols()) + " < " + std::to_string(steps) + ")");
  // Windows longer than look_back contribute their most recent steps.
  auto column = [&](std::size_t node, std::size_t step, double scale) {
    const Tensor& w = windows[node];
    const std::size_t col = w.cols() - steps + step;
    Tensor c = Tensor::matrix(batch, 1);
    for (std::size_t b = 0; b < batch; ++b) c[b] = scale * w.at(b, col);
    return c;
  };

  if (trace) trace->aggregates.assign(n, {});
  const std::size_t hidden = m.edge_hidden();

  // All directed edges of one type run as a single stacked batch: block e
  // holds edge e's [v_i, scale * v_j] pairs.
  std::map<EdgeType, std::vector<std::size_t>> by_type;  // type -> indices into m.edges
  for (std::size_t e = 0; e < m.edges.size(); ++e) by_type[m.edges[e].edge.type].push_back(e);
  std::map<EdgeType, Var> edge_hidden;  // type -> [edges * batch x H]
  for (const auto& [type, members] : by_type) {
    std::vector<Var> seq;
    for (std::size_t s = 0; s < steps; ++s) {
      Tensor pairs = Tensor::matrix(members.size() * batch, 2);
      for (std::size_t k = 0; k < members.size(); ++k) {
        const EdgeBinding& b = m.edges[members[k]];
        const Tensor& wi = windows[static_cast<std::size_t>(b.edge.src) - 1];
        const Tensor& wj = windows[static_cast<std::size_t>(b.edge.dst) - 1];
        const std::size_t ci = wi.cols() - steps + s;
        const std::size_t cj = wj.cols() - steps + s;
        for (std::size_t r = 0; r < batch; ++r) {
          pairs.at(k * batch + r, 0) = wi.at(r, ci);
          pairs.at(k * batch + r, 1) = b.input_scale * wj.at(r, cj);
        }
      }
      seq.push_back(tape.constant(std::move(pairs)));
    }
    edge_hidden.emplace(type, run_stack(tape, params, m.edge_pools.at(type), seq).top_hidden.back());
  }

  // Likewise all nodes of one class: block k is the class's k-th node.
  std::vector<Var> preds(n);
  for (int cls = 0; cls < m.classes.classes; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (m.classes(static_cast<int>(i) + 1) == cls) members.push_back(i);
    if (members.empty()) continue;

    std::vector<Var> context;
    for (EdgeType t : m.incident_types(cls)) {
      std::vector<std::vector<std::pair<std::size_t, double>>> groups(members.size());
      auto it = by_type.find(t);
      if (it != by_type.end())
        for (std::size_t k = 0; k < members.size(); ++k)
          for (std::size_t e = 0; e < it->second.size(); ++e) {
            const EdgeBinding& b = m.edges[it->second[e]];
            if (static_cast<std::size_t>(b.edge.src) - 1 == members[k]) groups[k].emplace_back(e, b.edge.weight);
          }
      const Var v = it != by_type.end()
                        ? tape.combine_blocks(edge_hidden.at(t), batch, std::move(groups))
                        : tape.constant(Tensor::matrix(members.size() * batch, hidden));
      context.push_back(v);
      if (trace) {
        const Tensor& val = tape.value(v);
        for (std::size_t k = 0; k < members.size(); ++k) {
          Tensor block = Tensor::matrix(batch, hidden);
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t c = 0; c < hidden; ++c) block.at(r, c) = val.at(k * batch + r, c);
          trace->aggregates[members[k]].emplace(t, std::move(block));
        }
      }
    }
    std::vector<Var> seq;
    for (std::size_t s = 0; s < steps; ++s) {
      Tensor own = Tensor::matrix(members.size() * batch, 1);
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Tensor& w = windows[members[k]];
        const std::size_t col = w.cols() - steps + s;
        for (std::size_t r = 0; r < batch; ++r) own[k * batch + r] = w.at(r, col);
      }
      std::vector<Var> parts{tape.constant(std::move(own))};
      parts.insert(parts.end(), context.begin(), context.end());
      seq.push_back(parts.size() == 1 ? parts[0] : tape.concat(parts));
    }
    const Var out = run_stack(tape, params, m.node_pools.at(cls), seq).readout;
    for (std::size_t k = 0; k < members.size(); ++k)
      preds[members[k]] = members.size() == 1 ? out : tape.combine_blocks(out, batch, {{{k, 1.0}}});
  }
  return preds;
}

// Scaled predictions, [node][batch].
inline std::vector<std::vector<double>> forward(const GSRNNModel& m, const std::vector<Tensor>& windows,
                                                ForwardTrace* trace = nullptr) {
  Tape tape;
  const auto preds = forward_on_tape(tape, m, m.params, windows, trace);
  std::vector<std::vector<double>> out;
  for (Var p : preds) {
    auto v = tape.value(p).values();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

// Single-sample convenience: features[i] is node i+1's look-back window.
inline std::vector<double> forward(const GSRNNModel& m, const std::vector<std::vector<double>>& features) {
  std::vector<Tensor> windows;
  for (const auto& f : features) windows.push_back(Tensor({1, f.size()}, f));
  std::vector<double> out;
  for (const auto& p : forward(m, windows)) out.push_back(p.at(0));
  return out;
}

// Mean squared error over nodes: (1/N) sum_i (pred_i - target_i)^2.
inline double loss(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size())
    throw structural_error("loss: " + std::to_string(preds.size()) + " predictions vs " +
                           std::to_string(targets.size()) + " targets");
  if (preds.empty()) throw structural_error("loss: no nodes");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Batches from windowed samples
// ---------------------------------------------------------------------------

struct Batch {
  std::vector<Tensor> windows;  // [node] -> [batch x look_back]
  std::vector<Tensor> targets;  // [node] -> [batch x 1], scaled
};

inline Batch make_batch(const WindowedDataset& data, std::span<const std::size_t> idx) {
  Batch b;
  if (data.samples.empty()) return b;
  const std::size_t n = data.samples[0].features.size();
  const std::size_t L = data.look_back;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor w = Tensor::matrix(idx.size(), L);
    Tensor y = Tensor::matrix(idx.size(), 1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Sample& s = data.samples.at(idx[r]);
      for (std::size_t k = 0; k < L; ++k) w.at(r, k) = s.features[i][k];
      y[r] = s.target_scaled[i];
    }
    b.windows.push_back(std::move(w));
    b.targets.push_back(std::move(y));
  }
  return b;
}

// Sum over the batch's time steps of (1/N) sum_i (pred - target)^2, on the tape.
inline Var batch_loss(Tape& tape, const std::vector<Var>& preds, const std::vector<Tensor>& targets) {
  Var total = tape.sq_error_sum(preds.at(0), targets.at(0));
  for (std::size_t i = 1; i < preds.size(); ++i)
    total = tape.add(total, tape.sq_error_sum(preds[i], targets[i]));
  return tape.scale(total, 1.0 / static_cast<double>(preds.size()));
}

// ---------------------------------------------------------------------------
// Training loop shared by GSRNN and the plain LSTM baseline.
// `batch_loss_fn(tape, sample_indices)` records a batch's data loss and
// returns it; it must read parameters through tape.param(name, params[name]).
// ---------------------------------------------------------------------------

template <class BatchLossFn>
std::vector<double> fit_params(ParamSet& params, std::size_t sample_count, BatchLossFn&& batch_loss_fn,
                               const TrainConfig& cfg, const PenaltyConfig& penalty) {
  penalty.validate();
  if (sample_count == 0) throw structural_error("training data is empty");
  if (!(cfg.lr > 0.0)) throw structural_error("learning rate must be positive");
  AdamState adam = AdamState::fresh(params, AdamConfig{cfg.lr});
  const std::size_t bs = cfg.batch_size == 0 ? sample_count : std::min(cfg.batch_size, sample_count);
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 shuffle(derive_seed(cfg.seed, 0x5348554646ULL));
  std::vector<double> history;
  history.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (bs < sample_count)
      for (std::size_t k = sample_count - 1; k > 0; --k)
        std::swap(order[k], order[shuffle.below(k + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < sample_count; start += bs) {
      const std::size_t end = std::min(start + bs, sample_count);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tape tape;
      const Var l = batch_loss_fn(tape, idx);
      const double value = tape.value(l)[0];
      if (!std::isfinite(value)) throw training_error(epoch, "non-finite loss");
      tape.backward(l);
      ParamSet grads;
      try {
        grads = collect_grads(tape, params);
      } catch (const numeric_error& e) {
        throw training_error(epoch, e.what());
      }
      if (penalty.kind != PenaltyKind::none && penalty.alpha > 0.0) {
        const ParamSet pg = penalty_subgradient(params, penalty);
        auto g = grads.begin();
        for (auto p = pg.begin(); p != pg.end(); ++p, ++g)
          for (std::size_t i = 0; i < g->second.tensor.size(); ++i)
            g->second.tensor[i] += penalty.alpha * p->second.tensor[i];
      }
      adam_update(params, grads, adam);
      epoch_loss += value;
    }
    epoch_loss += penalty.alpha * penalty_value(params, penalty);
    if (!std::isfinite(epoch_loss)) throw training_error(epoch, "non-finite loss");
    history.push_back(epoch_loss);
  }
  return history;
}

// Full training objective: sum over samples of L^t plus alpha * P(weights).
inline double objective(const GSRNNModel& m, const ParamSet& params, const WindowedDataset& data,
                        const PenaltyConfig& penalty) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Batch b = make_batch(data, idx);
  Tape tape;
  const Var l = batch_loss(tape, forward_on_tape(tape, m, params, b.windows), b.targets);
  return tape.value(l)[0] + penalty.alpha * penalty_value(params, penalty);
}

inline double objective(const GSRNNModel& m, const WindowedDataset& data, const PenaltyConfig& penalty) {
  return objective(m, m.params, data, penalty);
}

// Gradient of objective() by reverse mode.
inline ParamSet objective_gradient(const GSRNNModel& m, const ParamSet& params,
                                   const WindowedDataset& data, const PenaltyConfig& penalty) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Batch b = make_batch(data, idx);
  ParamSet g = bptt(params, [&](Tape& tape, const std::map<std::string, Var>&) {
    return batch_loss(tape, forward_on_tape(tape, m, params, b.windows), b.targets);
  });
  const ParamSet pg = penalty_subgradient(params, penalty);
  auto gi = g.begin();
  for (auto p = pg.begin(); p != pg.end(); ++p, ++gi)
    for (std::size_t i = 0; i < gi->second.tensor.size(); ++i)
      gi->second.tensor[i] += penalty.alpha * p->second.tensor[i];
  return g;
}

// Trains all edge and node pools jointly with Adam; returns the trained model.
inline GSRNNModel train(GSRNNModel m, const WindowedDataset& data, const TrainConfig& cfg,
                        const PenaltyConfig& penalty) {
  if (data.look_back != m.arch.look_back)
    throw structural_error("training windows use look_back " + std::to_string(data.look_back) +
                           " but the model expects " + std::to_string(m.arch.look_back));
  if (cfg.epochs == 0) return m;
  const ParamSet& params = m.params;
  auto history = fit_params(
      m.params, data.size(),
      [&](Tape& tape, std::span<const std::size_t> idx) {
        const Batch b = make_batch(data, idx);
        return batch_loss(tape, forward_on_tape(tape, m, params, b.windows), b.targets);
      },
      cfg, penalty);
  m.training.epochs += cfg.epochs;
  m.training.lr = cfg.lr;
  m.training.batch_size = cfg.batch_size;
  m.training.penalty = penalty;
  m.training.loss_history.insert(m.training.loss_history.end(), history.begin(), history.end());
  return m;
}

// ---------------------------------------------------------------------------
// Prediction in original units and model-level regularization helpers
// ---------------------------------------------------------------------------

// Per-node predictions for panel week index t from the look_back true values before it.
inline std::vector<double> predict_week(const GSRNNModel& m, const TimeSeriesPanel& panel, std::size_t t) {
  const std::size_t L = m.arch.look_back;
  if (t < L || t >= panel.length() + 1)
    throw structural_error("not enough history to predict week index " + std::to_string(t));
  if (m.scaler.min.size() != static_cast<std::size_t>(m.node_count()))
    throw structural_error("model has no fitted scaler");
  std::vector<std::vector<double>> features;
  for (int id = 1; id <= m.node_count(); ++id) {
    const auto& s = panel.series(id);
    std::vector<double> f(L);
    for (std::size_t k = 0; k < L; ++k) f[k] = m.scaler.transform(id - 1, s[t - L + k]);
    features.push_back(std::move(f));
  }
  auto out = forward(m, features);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.scaler.inverse(i, out[i]);
  return out;
}

inline GSRNNModel hard_threshold(GSRNNModel m, double theta) {
  m.params = hard_threshold(std::move(m.params), theta);
  return m;
}

inline SparsityReport sparsity_report(const GSRNNModel& m, double theta) {
  return sparsity_report(m.params, theta);
}

}  // namespace gsrnn
