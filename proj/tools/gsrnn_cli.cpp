#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsrnn/gsrnn.hpp"
#include "gsrnn/pipeline.hpp"

namespace {

using namespace gsrnn;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw structural_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw structural_error("cannot write '" + path + "'");
  out << bytes;
  if (!out.flush()) throw structural_error("failed writing '" + path + "'");
}

RegionGraph load_graph(const std::string& path) { return parse_graph(read_file(path)); }
TimeSeriesPanel load_panel_file(const std::string& path) { return load_panel(read_file(path)); }

GSRNNModel load_model(const std::string& path, const CheckpointExpectations& expect = {}) {
  return load_checkpoint(read_file(path), expect);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Shared optimizer flags.
struct OptimFlags {
  std::size_t epochs = TrainConfig{}.epochs;
  double lr = TrainConfig{}.lr;
  std::size_t batch_size = TrainConfig{}.batch_size;
  std::uint64_t seed = 0;

  void add(CLI::App* app, bool seed_required) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "Mini-batch size in samples (0 = full batch)")
        ->capture_default_str();
    auto* s = app->add_option("--seed", seed, "Random seed")->capture_default_str();
    if (seed_required) s->required();
  }

  TrainConfig config() const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    return cfg;
  }
};

void print_eval_summary(const EvalReport& r, std::ostream& out) {
  out << "evaluation " << r.first_week.str() << " .. " << r.last_week.str() << "\n";
  out << "method";
  for (int node : r.nodes) out << "," << node;
  out << ",aggregate\n";
  for (const auto& m : r.methods) {
    out << m;
    for (int node : r.nodes) {
      const EvalCell& c = r.cell(m, node);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", c.rmse);
      out << "," << (c.error.empty() ? std::string(buf) : std::string("error"));
    }
    char agg[32];
    try {
      std::snprintf(agg, sizeof agg, "%.4f", r.aggregate_rmse(m));
    } catch (const structural_error&) {
      std::snprintf(agg, sizeof agg, "n/a");
    }
    out << "," << agg << "\n";
  }
  for (const auto& [m, wins] : r.win_counts()) out << "wins " << m << ": " << wins << "\n";
  for (const auto& c : r.cells)
    if (!c.error.empty()) out << "error " << c.method << " node " << c.node << ": " << c.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-structured recurrent forecasting of regional activity series"};
  app.require_subcommand(1);

  // synth
  std::string graph_path, out_path, panel_path, ckpt_path, report_path, split_str, week_str;
  std::size_t weeks = 0;
  double coupling = 0.0, noise = 0.0;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic coupled panel");
  synth->add_option("--graph", graph_path, "Graph file")->required();
  synth->add_option("--weeks", weeks, "Number of weeks")->required();
  synth->add_option("--coupling", coupling, "Lagged neighbour coupling in [0,1)")->required();
  synth->add_option("--noise", noise, "Gaussian noise standard deviation")->required();
  synth->add_option("--seed", synth_seed, "Random seed")->required();
  synth->add_option("--out", out_path, "Output panel CSV")->required();

  // train
  int classes = 2;
  std::string penalty_kind = "none";
  double alpha = PenaltyConfig{}.alpha, tl1_a = PenaltyConfig{}.a;
  OptimFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a GSRNN and write a checkpoint");
  train_cmd->add_option("--panel", panel_path, "Panel CSV")->required();
  train_cmd->add_option("--graph", graph_path, "Graph file")->required();
  train_cmd->add_option("--split", split_str, "First test week, YYYY:WW")->required();
  train_cmd->add_option("--classes", classes, "Number of activity classes")->capture_default_str();
  train_flags.add(train_cmd, false);
  train_cmd->add_option("--penalty", penalty_kind, "Weight penalty")
      ->check(CLI::IsMember({"none", "l1", "tl1"}))
      ->capture_default_str();
  train_cmd->add_option("--alpha", alpha, "Penalty strength")->capture_default_str();
  train_cmd->add_option("--tl1-a", tl1_a, "Transformed-l1 shape parameter a > 0")->capture_default_str();
  train_cmd->add_option("--out", out_path, "Output checkpoint")->required();

  // sparsify
  double threshold = 1e-3;
  auto* sparsify = app.add_subcommand("sparsify", "Zero every weight with |w| below a threshold");
  sparsify->add_option("--ckpt", ckpt_path, "Input checkpoint")->required();
  sparsify->add_option("--threshold", threshold, "Threshold")->capture_default_str();
  sparsify->add_option("--out", out_path, "Output checkpoint")->required();

  // report-sparsity
  auto* report_sparsity = app.add_subcommand("report-sparsity", "Per-tensor fraction of weights below a threshold");
  report_sparsity->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  report_sparsity->add_option("--threshold", threshold, "Threshold")->capture_default_str();

  // evaluate
  std::vector<std::string> ckpts;
  std::string baselines;
  OptimFlags baseline_flags;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Rolling one-week-ahead RMSE of models and baselines");
  evaluate_cmd->add_option("--panel", panel_path, "Panel CSV")->required();
  evaluate_cmd->add_option("--graph", graph_path, "Graph file")->required();
  evaluate_cmd->add_option("--split", split_str, "First test week, YYYY:WW")->required();
  evaluate_cmd->add_option("--ckpt", ckpts, "GSRNN checkpoint (repeatable)");
  evaluate_cmd->add_option("--baselines", baselines, "Comma-separated baselines: ar3, lstm");
  baseline_flags.add(evaluate_cmd, false);
  evaluate_cmd->add_option("--out", out_path, "Report CSV")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Per-node forecast for one week");
  predict->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  predict->add_option("--panel", panel_path, "Panel CSV")->required();
  predict->add_option("--week", week_str, "Week to forecast, YYYY:WW")->required();

  // emit-plots
  auto* emit_plots = app.add_subcommand("emit-plots", "Long-form truth/prediction CSV from a report");
  emit_plots->add_option("--report", report_path, "Report CSV")->required();
  emit_plots->add_option("--out", out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth) {
      write_file(out_path, save_panel(synth_panel(load_graph(graph_path), weeks, coupling, noise, synth_seed)));
    } else if (*train_cmd) {
      const Experiment ex =
          make_experiment(load_panel_file(panel_path), load_graph(graph_path), epiweek::parse(split_str));
      PenaltyConfig penalty{parse_penalty_kind(penalty_kind), alpha, tl1_a};
      if (penalty.kind == PenaltyKind::none) penalty.alpha = 0.0;
      const GSRNNModel m = fit_gsrnn(ex, classes, GSRNNArch{}, train_flags.config(), penalty);
      write_file(out_path, save_checkpoint(m));
      if (!m.training.loss_history.empty())
        std::cerr << "trained " << m.training.epochs << " epochs, final objective "
                  << m.training.loss_history.back() << "\n";
    } else if (*sparsify) {
      if (!(threshold >= 0.0)) throw structural_error("threshold must be non-negative");
      write_file(out_path, save_checkpoint(hard_threshold(load_model(ckpt_path), threshold)));
    } else if (*report_sparsity) {
      if (!(threshold >= 0.0)) throw structural_error("threshold must be non-negative");
      std::cout << sparsity_report(load_model(ckpt_path), threshold).csv();
    } else if (*evaluate_cmd) {
      const Experiment ex =
          make_experiment(load_panel_file(panel_path), load_graph(graph_path), epiweek::parse(split_str));
      std::vector<Forecaster> methods;
      for (const std::string& path : ckpts) {
        CheckpointExpectations expect;
        expect.graph = ex.graph;
        auto m = std::make_shared<const GSRNNModel>(load_model(path, expect));
        const std::string name =
            ckpts.size() == 1 ? "GSRNN" : "GSRNN:" + std::filesystem::path(path).filename().string();
        methods.push_back(gsrnn_forecaster(name, std::move(m)));
      }
      const TimeSeriesPanel train_panel = ex.train();
      for (const std::string& b : split_list(baselines)) {
        if (b == "ar3") methods.push_back(ar_forecaster(train_panel, 3));
        else if (b == "lstm") methods.push_back(lstm_forecaster(train_panel, LSTMBaselineSpec{}, baseline_flags.config()));
        else throw structural_error("unknown baseline '" + b + "' (expected ar3 or lstm)");
      }
      if (methods.empty()) throw structural_error("nothing to evaluate: pass --ckpt and/or --baselines");
      const EvalReport report = evaluate(methods, ex.panel, ex.first_test);
      write_file(out_path, report_csv(report));
      print_eval_summary(report, std::cout);
    } else if (*predict) {
      const GSRNNModel m = load_model(ckpt_path);
      const TimeSeriesPanel panel = load_panel_file(panel_path);
      if (panel.node_ids.size() != static_cast<std::size_t>(m.node_count()))
        throw structural_error("panel node count does not match the checkpoint");
      const EpiWeek w = epiweek::parse(week_str);
      // The week may be inside the panel or the one right after its end.
      const std::size_t t =
          !panel.weeks.empty() && w == epiweek::next(panel.weeks.back()) ? panel.length() : panel.week_index(w);
      const auto preds = predict_week(m, panel, t);
      std::cout << "region_id,year,epiweek,prediction\n";
      for (std::size_t i = 0; i < preds.size(); ++i)
        std::cout << panel.node_ids[i] << "," << w.year << "," << w.week << "," << format_exact(preds[i]) << "\n";
    } else if (*emit_plots) {
      write_file(out_path, emit_plot_data(parse_report_csv(read_file(report_path))));
    }
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
