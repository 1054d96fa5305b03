#include <cmath>

#include <gtest/gtest.h>

#include "gsrnn/gsrnn.hpp"
#include "gsrnn/pipeline.hpp"
#include "test_util.hpp"

using namespace gsrnn;
using gsrnn::test::path_graph;
using gsrnn::test::random_tensor;

namespace {

GSRNNArch small_arch() {
  GSRNNArch a;
  a.edge_hidden = {3};
  a.node_hidden = {2, 3};
  return a;
}

std::vector<Tensor> random_windows(int nodes, std::size_t batch, std::size_t steps, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Tensor> w;
  for (int i = 0; i < nodes; ++i) w.push_back(random_tensor({batch, steps}, rng, 0, 1));
  return w;
}

GSRNNModel zeroed(GSRNNModel m) {
  for (auto& [_, e] : m.params) e.tensor.fill(0.0);
  return m;
}

// Small trained-ready setup on a synthetic panel.
struct SmallSetup {
  Experiment ex;
  GSRNNModel model;
  WindowedDataset data;
};

SmallSetup small_setup(std::size_t weeks = 60) {
  const RegionGraph g = path_graph(4);
  Experiment ex = make_experiment(synth_panel(g, weeks, 0.5, 0.05, 3), g, weeks - 10);
  const TimeSeriesPanel train = ex.train();
  GSRNNModel m = build_model(ex.graph, classify_nodes(train, ex.graph, 2), small_arch(), 5);
  m.scaler = Scaler::fit(train);
  WindowedDataset d = make_windows(train, 2, m.scaler);
  return {std::move(ex), std::move(m), std::move(d)};
}

}  // namespace

TEST(BuildModel, PoolsPerTypeAndClass) {
  // path 1-2-3-4 with classes {1,1,0,0}: H-H, H-L, L-L all present
  const RegionGraph g = normalize_weights(path_graph(4));
  const GSRNNModel a = build_model(g, ClassAssignment{2, {1, 1, 0, 0}}, GSRNNArch{}, 1);
  EXPECT_EQ(a.edge_pools.size(), 3u);
  EXPECT_EQ(a.node_pools.size(), 2u);
  // classes {0,1,1,0}: no L-L edge
  const GSRNNModel b = build_model(g, ClassAssignment{2, {0, 1, 1, 0}}, GSRNNArch{}, 1);
  EXPECT_EQ(b.edge_pools.size(), 2u);
  EXPECT_EQ(b.node_pools.size(), 2u);
}

TEST(BuildModel, InputWidths) {
  const RegionGraph g = normalize_weights(path_graph(4));
  const GSRNNModel m = build_model(g, ClassAssignment{2, {1, 1, 0, 0}}, GSRNNArch{}, 1);
  for (const auto& [_, s] : m.edge_pools) {
    EXPECT_EQ(s.input, 2u);
    EXPECT_EQ(s.hidden, (std::vector<std::size_t>{40}));
  }
  // class 0 touches H-L and L-L, class 1 touches H-H and H-L
  EXPECT_EQ(m.node_pools[0].input, 1u + 2u * 40u);
  EXPECT_EQ(m.node_pools[1].input, 1u + 2u * 40u);
  EXPECT_EQ(m.node_pools[0].hidden, (std::vector<std::size_t>{10, 40, 10}));
  EXPECT_EQ(m.params[m.node_pools[0].readout_weight()].shape(), (std::vector<std::size_t>{1, 10}));
}

TEST(BuildModel, SeededAndDeterministic) {
  const RegionGraph g = normalize_weights(path_graph(4));
  const ClassAssignment c{2, {1, 1, 0, 0}};
  EXPECT_EQ(build_model(g, c, small_arch(), 7).params, build_model(g, c, small_arch(), 7).params);
  EXPECT_NE(build_model(g, c, small_arch(), 7).params, build_model(g, c, small_arch(), 8).params);
}

TEST(BuildModel, EmptyClassIsStructural) {
  const RegionGraph g = normalize_weights(path_graph(3));
  EXPECT_THROW(build_model(g, ClassAssignment{2, {0, 0, 0}}, small_arch(), 1), structural_error);
  EXPECT_THROW(build_model(g, ClassAssignment{2, {0, 1}}, small_arch(), 1), structural_error);
}

TEST(Forward, WeightSharingIsByIdentity) {
  const RegionGraph g = normalize_weights(path_graph(5));
  SmallSetup s = small_setup();
  const GSRNNModel m = build_model(g, ClassAssignment{2, {1, 1, 1, 0, 0}}, small_arch(), 1);
  EXPECT_EQ(&m.edge_stack_for(1, 2), &m.edge_stack_for(3, 2));
  EXPECT_EQ(&m.edge_stack_for(2, 3), &m.edge_stack_for(2, 1));
  EXPECT_EQ(&m.edge_stack_for(3, 4), &m.edge_stack_for(4, 3));
  EXPECT_NE(&m.edge_stack_for(1, 2), &m.edge_stack_for(3, 4));
  EXPECT_EQ(&m.node_stack_for(1), &m.node_stack_for(3));

  // After training, pools and their single parameter storage are unchanged in number.
  const GSRNNModel t = train(s.model, s.data, TrainConfig{2, 1e-3, 8, 1}, PenaltyConfig{});
  EXPECT_EQ(&t.edge_stack_for(1, 2), &t.edge_stack_for(2, 1));
  EXPECT_EQ(t.params.size(), s.model.params.size());
  std::size_t expected = 0;
  for (const auto& [_, st] : t.edge_pools) expected += 8 * st.layers();
  for (const auto& st : t.node_pools) expected += 8 * st.layers() + 2;
  EXPECT_EQ(t.params.size(), expected);
}

TEST(Forward, ZeroModelPredictsClassReadoutBias) {
  const RegionGraph g = normalize_weights(path_graph(4));
  GSRNNModel m = zeroed(build_model(g, ClassAssignment{2, {1, 1, 0, 0}}, small_arch(), 1));
  m.params[m.node_pools[0].readout_bias()][0] = 0.25;
  m.params[m.node_pools[1].readout_bias()][0] = 0.75;
  const auto out = forward(m, random_windows(4, 3, 2, 1));
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(out[0][b], 0.75);
    EXPECT_EQ(out[1][b], 0.75);
    EXPECT_EQ(out[2][b], 0.25);
    EXPECT_EQ(out[3][b], 0.25);
  }
}

TEST(Forward, IsolatedNodeSeesZeroAggregates) {
  RegionGraph g(4);
  g.add_undirected(1, 2);
  g.add_undirected(2, 3);
  const GSRNNModel m = build_model(normalize_weights(g), ClassAssignment{2, {1, 1, 0, 0}}, small_arch(), 2);
  auto w = random_windows(4, 2, 2, 3);
  ForwardTrace trace;
  const auto base = forward(m, w, &trace);
  for (const auto& [type, agg] : trace.aggregates[3])
    for (double v : agg.values()) EXPECT_EQ(v, 0.0);
  // Changing any other node's features leaves node 4 alone.
  for (int i = 0; i < 3; ++i)
    for (double& v : w[i].values()) v = 1.0 - v;
  EXPECT_EQ(forward(m, w)[3], base[3]);
}

TEST(Forward, MirroredNodesPredictIdentically) {
  const RegionGraph g = normalize_weights(path_graph(4));
  const GSRNNModel m = build_model(g, ClassAssignment{2, {0, 1, 1, 0}}, small_arch(), 9);
  auto w = random_windows(4, 5, 2, 4);
  w[3] = w[0];
  w[2] = w[1];
  const auto out = forward(m, w);
  EXPECT_EQ(out[0], out[3]);
  EXPECT_EQ(out[1], out[2]);
}

TEST(Forward, AggregatesAreLinearInEdgeWeights) {
  const RegionGraph g = normalize_weights(gsrnn::test::hhs_graph());
  const GSRNNModel m = build_model(g, ClassAssignment{2, {0, 1, 1, 1, 1, 0, 0, 0, 0, 0}}, small_arch(), 3);
  GSRNNModel doubled = m;
  for (EdgeBinding& b : doubled.edges) b.edge.weight *= 2.0;
  const auto w = random_windows(10, 3, 2, 5);
  ForwardTrace t1, t2;
  forward(m, w, &t1);
  forward(doubled, w, &t2);
  for (std::size_t i = 0; i < 10; ++i) {
    ASSERT_EQ(t1.aggregates[i].size(), t2.aggregates[i].size());
    for (const auto& [type, agg] : t1.aggregates[i]) {
      const Tensor& d = t2.aggregates[i].at(type);
      for (std::size_t k = 0; k < agg.size(); ++k) EXPECT_EQ(d[k], 2.0 * agg[k]);
    }
  }
}

TEST(Forward, BatchedEqualsSingleSamples) {
  const RegionGraph g = normalize_weights(path_graph(4));
  const GSRNNModel m = build_model(g, ClassAssignment{2, {1, 1, 0, 0}}, small_arch(), 3);
  const auto w = random_windows(4, 6, 2, 8);
  const auto batched = forward(m, w);
  for (std::size_t b = 0; b < 6; ++b) {
    std::vector<std::vector<double>> single;
    for (const Tensor& t : w) single.emplace_back(t.row(b).begin(), t.row(b).end());
    const auto out = forward(m, single);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], batched[i][b]);
  }
}

TEST(Forward, ShortWindowIsStructuralAndForwardIsPure) {
  const RegionGraph g = normalize_weights(path_graph(3));
  const GSRNNModel m = build_model(g, ClassAssignment{2, {1, 0, 0}}, small_arch(), 3);
  const GSRNNModel before = m;
  EXPECT_THROW(forward(m, random_windows(3, 2, 1, 1)), structural_error);
  EXPECT_THROW(forward(m, random_windows(2, 2, 2, 1)), structural_error);
  forward(m, random_windows(3, 2, 2, 1));
  EXPECT_EQ(m.params, before.params);
}

TEST(Loss, HandEvaluations) {
  EXPECT_EQ(loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_EQ(loss(std::vector<double>{1, 3}, std::vector<double>{0, 0}), 5.0);
  EXPECT_THROW(loss(std::vector<double>{1}, std::vector<double>{1, 2}), structural_error);
  EXPECT_THROW(loss(std::vector<double>{}, std::vector<double>{}), structural_error);
}

TEST(Loss, QuadraticHomogeneity) {
  SplitMix64 rng(2);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> p(5), t(5), pc(5);
    const double c = rng.uniform(-3, 3);
    for (int i = 0; i < 5; ++i) {
      p[i] = rng.uniform(-1, 1);
      t[i] = rng.uniform(-1, 1);
      pc[i] = t[i] + c * (p[i] - t[i]);
    }
    EXPECT_NEAR(loss(pc, t), c * c * loss(p, t), 1e-12);
  }
}

TEST(Objective, PenalizedGradientMatchesFiniteDifferences) {
  RegionGraph g(3);
  g.add_undirected(1, 2);
  g.add_undirected(2, 3);
  GSRNNArch arch;
  arch.edge_hidden = {2};
  arch.node_hidden = {2};
  const Experiment ex = make_experiment(synth_panel(g, 20, 0.5, 0.1, 1), g, 5);
  const TimeSeriesPanel train = ex.train();
  GSRNNModel m = build_model(ex.graph, ClassAssignment{2, {1, 0, 0}}, arch, 4);
  m.scaler = Scaler::fit(train);
  const WindowedDataset d = make_windows(train, 2, m.scaler);
  ASSERT_EQ(d.size(), 3u);
  SplitMix64 rng(6);
  for (auto& [_, e] : m.params)
    if (e.kind == ParamKind::bias) e.tensor = random_tensor(e.tensor.shape(), rng, -0.3, 0.3);
  for (PenaltyKind kind : {PenaltyKind::none, PenaltyKind::l1, PenaltyKind::tl1}) {
    const PenaltyConfig pc{kind, 1e-2, 1.0};
    const ParamSet grad = objective_gradient(m, m.params, d, pc);
    const double err = grad_check([&](const ParamSet& p) { return objective(m, p, d, pc); }, m.params, grad, 1e-5);
    EXPECT_LT(err, 1e-4) << to_string(kind);
  }
}

TEST(Train, ZeroEpochsReturnsModelUnchanged) {
  const SmallSetup s = small_setup();
  const GSRNNModel t = train(s.model, s.data, TrainConfig{0, 1e-3, 0, 1}, PenaltyConfig{});
  EXPECT_EQ(t.params, s.model.params);
  EXPECT_TRUE(t.training.loss_history.empty());
}

TEST(Train, ReducesTrainingLossTenfold) {
  const SmallSetup s = small_setup(160);
  const GSRNNModel t = train(s.model, s.data, TrainConfig{500, 1e-3, 0, 1}, PenaltyConfig{});
  ASSERT_EQ(t.training.loss_history.size(), 500u);
  EXPECT_LT(t.training.loss_history.back(), 0.1 * t.training.loss_history.front());
}

TEST(Train, VanishingPenaltyLeavesHistoryUnchanged) {
  const SmallSetup s = small_setup();
  const TrainConfig cfg{20, 1e-3, 16, 2};
  const auto a = train(s.model, s.data, cfg, PenaltyConfig{PenaltyKind::tl1, 0.0, 1.0}).training.loss_history;
  const auto b = train(s.model, s.data, cfg, PenaltyConfig{PenaltyKind::tl1, 1e-30, 1.0}).training.loss_history;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
}

TEST(Train, IsDeterministic) {
  const SmallSetup s = small_setup();
  const TrainConfig cfg{5, 1e-3, 8, 3};
  const PenaltyConfig pc{PenaltyKind::l1, 5e-8, 1.0};
  EXPECT_EQ(save_checkpoint(train(s.model, s.data, cfg, pc)), save_checkpoint(train(s.model, s.data, cfg, pc)));
}

TEST(Train, DivergenceReportsEpoch) {
  SmallSetup s = small_setup();
  s.model.params.begin()->second.tensor[0] = std::numeric_limits<double>::infinity();
  try {
    train(s.model, s.data, TrainConfig{3, 1e-3, 0, 1}, PenaltyConfig{});
    FAIL();
  } catch (const training_error& e) {
    EXPECT_EQ(e.epoch(), 0u);
  }
}

TEST(Train, LookBackMismatchIsStructural) {
  SmallSetup s = small_setup();
  const WindowedDataset d3 = make_windows(s.ex.train(), 3, s.model.scaler);
  EXPECT_THROW(train(s.model, d3, TrainConfig{1, 1e-3, 0, 1}, PenaltyConfig{}), structural_error);
}

TEST(Checkpoint, RoundTripIsLossless) {
  const SmallSetup s = small_setup();
  const GSRNNModel t = train(s.model, s.data, TrainConfig{3, 1e-3, 8, 1}, PenaltyConfig{PenaltyKind::tl1, 5e-8, 1.0});
  const std::string bytes = save_checkpoint(t);
  const GSRNNModel back = load_checkpoint(bytes);
  EXPECT_EQ(save_checkpoint(back), bytes);
  EXPECT_EQ(back.params, t.params);
  EXPECT_EQ(back.scaler, t.scaler);
  EXPECT_EQ(back.training, t.training);
  EXPECT_EQ(back.graph, t.graph);
  EXPECT_EQ(back.classes, t.classes);
  const auto w = random_windows(4, 3, 2, 9);
  EXPECT_EQ(forward(back, w), forward(t, w));
}

TEST(Checkpoint, TruncatedPayloadIsCorrupt) {
  const std::string bytes = save_checkpoint(small_setup().model);
  EXPECT_THROW(load_checkpoint(bytes.substr(0, bytes.size() - 10)), checkpoint_corrupt_error);
  EXPECT_THROW(load_checkpoint(bytes.substr(0, 20)), checkpoint_corrupt_error);
  std::string flipped = bytes;
  flipped[flipped.size() - 20] = flipped[flipped.size() - 20] == 'a' ? 'b' : 'a';
  EXPECT_THROW(load_checkpoint(flipped), checkpoint_corrupt_error);
}

TEST(Checkpoint, VersionMismatch) {
  std::string bytes = save_checkpoint(small_setup().model);
  bytes.replace(bytes.find("format_version: 1"), 17, "format_version: 9");
  EXPECT_THROW(load_checkpoint(bytes), checkpoint_version_error);
}

TEST(Checkpoint, GraphHashMismatch) {
  const SmallSetup s = small_setup();
  const std::string bytes = save_checkpoint(s.model);
  CheckpointExpectations ok;
  ok.graph = s.ex.graph;
  EXPECT_NO_THROW(load_checkpoint(bytes, ok));
  CheckpointExpectations other;
  other.graph = normalize_weights(path_graph(5));
  EXPECT_THROW(load_checkpoint(bytes, other), checkpoint_hash_error);
}

TEST(Checkpoint, ArchitectureMismatch) {
  const std::string bytes = save_checkpoint(small_setup().model);
  CheckpointExpectations expect;
  expect.arch = GSRNNArch{};
  EXPECT_THROW(load_checkpoint(bytes, expect), checkpoint_shape_error);
}

TEST(Checkpoint, DistinctErrorKinds) {
  EXPECT_THROW(load_checkpoint("hello\n"), checkpoint_corrupt_error);
  EXPECT_THROW(load_checkpoint(""), checkpoint_corrupt_error);
}
