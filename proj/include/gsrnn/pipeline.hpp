#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsrnn/baselines.hpp"
#include "gsrnn/eval.hpp"
#include "gsrnn/graph.hpp"
#include "gsrnn/model.hpp"
#include "gsrnn/panel.hpp"

namespace gsrnn {

// A panel, its region graph and the index of the first test week.
struct Experiment {
  RegionGraph graph{0};  // weights normalized
  TimeSeriesPanel panel;
  std::size_t first_test = 0;

  TimeSeriesPanel train() const { return panel.slice(0, first_test); }
};

inline Experiment make_experiment(TimeSeriesPanel panel, const RegionGraph& graph, std::size_t first_test) {
  panel.validate();
  if (panel.node_count() != static_cast<std::size_t>(graph.node_count()))
    throw structural_error("panel has " + std::to_string(panel.node_count()) + " nodes but the graph has " +
                           std::to_string(graph.node_count()));
  for (std::size_t i = 0; i < panel.node_count(); ++i)
    if (panel.node_ids[i] != static_cast<int>(i) + 1)
      throw structural_error("panel region ids must be 1.." + std::to_string(graph.node_count()));
  if (first_test == 0 || first_test >= panel.length())
    throw structural_error("split must leave at least one training and one test week");
  return Experiment{normalize_weights(graph), std::move(panel), first_test};
}

inline Experiment make_experiment(TimeSeriesPanel panel, const RegionGraph& graph, EpiWeek first_test) {
  const std::size_t t = panel.week_index(first_test);
  return make_experiment(std::move(panel), graph, t);
}

// Classifies nodes on the training split, fits the scaler there and trains.
inline GSRNNModel fit_gsrnn(const Experiment& ex, int classes, const GSRNNArch& arch, const TrainConfig& cfg,
                            const PenaltyConfig& penalty) {
  const TimeSeriesPanel train_panel = ex.train();
  GSRNNModel m = build_model(ex.graph, classify_nodes(train_panel, ex.graph, classes), arch, cfg.seed);
  m.scaler = Scaler::fit(train_panel);
  return train(std::move(m), make_windows(train_panel, arch.look_back, m.scaler), cfg, penalty);
}

inline Forecaster gsrnn_forecaster(std::string name, std::shared_ptr<const GSRNNModel> m) {
  return {std::move(name), [m](const TimeSeriesPanel& p, std::size_t t) { return predict_week(*m, p, t); }};
}

// Per-node AR(p) fitted on the training panel.
inline Forecaster ar_forecaster(const TimeSeriesPanel& train, std::size_t p, std::string name = "AR3") {
  auto models = std::make_shared<std::vector<ARModel>>();
  for (const auto& series : train.values) models->push_back(fit_ar(series, p));
  return {std::move(name), [models](const TimeSeriesPanel& panel, std::size_t t) {
            std::vector<double> out;
            for (std::size_t i = 0; i < models->size(); ++i)
              out.push_back(predict_ar((*models)[i], std::span(panel.values[i]).first(t)));
            return out;
          }};
}

// One plain LSTM per node, trained on that node's training series.
inline Forecaster lstm_forecaster(const TimeSeriesPanel& train, const LSTMBaselineSpec& spec, TrainConfig cfg,
                                  std::string name = "LSTM") {
  auto models = std::make_shared<std::vector<LSTMForecaster>>();
  const std::uint64_t seed = cfg.seed;
  for (int id : train.node_ids) {
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(id));
    models->push_back(train_lstm_baseline(train, id, spec, cfg));
  }
  return {std::move(name), [models](const TimeSeriesPanel& panel, std::size_t t) {
            std::vector<double> out;
            for (std::size_t i = 0; i < models->size(); ++i)
              out.push_back((*models)[i].predict(std::span(panel.values[i]).first(t)));
            return out;
          }};
}

// y^t = y^{t-1}
inline Forecaster persistence_forecaster(std::string name = "persistence") {
  return {std::move(name), [](const TimeSeriesPanel& panel, std::size_t t) {
            if (t == 0) throw structural_error("persistence needs one week of history");
            std::vector<double> out;
            for (const auto& s : panel.values) out.push_back(s[t - 1]);
            return out;
          }};
}

}  // namespace gsrnn
