#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/panel.hpp"
#include "gsrnn/reference.hpp"

namespace gsrnn {

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw structural_error("rmse: " + std::to_string(pred.size()) + " predictions vs " +
                           std::to_string(truth.size()) + " truths");
  if (pred.empty()) throw structural_error("rmse of an empty sequence");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = truth[i] - pred[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

// A one-week-ahead forecaster: per-node predictions (panel node order) for
// week index t. Implementations may read only panel weeks before t.
struct Forecaster {
  std::string name;
  std::function<std::vector<double>(const TimeSeriesPanel&, std::size_t)> predict;
};

struct Trace {
  std::string method;
  int node = 0;
  EpiWeek week;
  double truth = 0.0;
  double prediction = 0.0;
  friend bool operator==(const Trace&, const Trace&) = default;
};

struct EvalCell {
  std::string method;
  int node = 0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty when the cell was computed
};

struct ReferenceCell {
  std::string method;  // published method name
  int node = 0;
  double rmse = 0.0;
};

struct DeltaCell {
  std::string method;     // computed method
  std::string reference;  // published method it is compared with
  int node = 0;
  double delta = 0.0;  // computed - published
};

struct EvalReport {
  EpiWeek first_week;
  EpiWeek last_week;
  std::vector<std::string> methods;
  std::vector<int> nodes;
  std::vector<EvalCell> cells;
  std::vector<Trace> traces;
  std::vector<ReferenceCell> references;
  std::vector<DeltaCell> deltas;

  const EvalCell& cell(std::string_view method, int node) const {
    for (const auto& c : cells)
      if (c.method == method && c.node == node) return c;
    throw structural_error("no cell for method '" + std::string(method) + "' node " + std::to_string(node));
  }

  // RMSE pooled over every (node, week) prediction of a method.
  double aggregate_rmse(std::string_view method) const {
    std::vector<double> p, t;
    for (const auto& tr : traces)
      if (tr.method == method) {
        p.push_back(tr.prediction);
        t.push_back(tr.truth);
      }
    return rmse(p, t);
  }

  // Per method, the number of nodes on which it has the strictly lowest computed RMSE.
  std::map<std::string, int> win_counts() const {
    std::map<std::string, int> wins;
    for (const auto& m : methods) wins[m] = 0;
    for (int node : nodes) {
      const EvalCell* best = nullptr;
      bool tie = false;
      for (const auto& c : cells) {
        if (c.node != node || !c.error.empty() || !std::isfinite(c.rmse)) continue;
        if (!best || c.rmse < best->rmse) {
          best = &c;
          tie = false;
        } else if (c.rmse == best->rmse) {
          tie = true;
        }
      }
      if (best && !tie) ++wins[best->method];
    }
    return wins;
  }
};

// Published method a computed method is compared against, if any.
inline std::optional<std::string_view> reference_counterpart(std::string_view method) {
  if (method == "AR3") return "AR(3)";
  if (method == "LSTM") return "LSTM";
  if (method.substr(0, 5) == "GSRNN") return "GSRNN";
  return std::nullopt;
}

// Rolling one-week-ahead evaluation over panel weeks [first_test, end):
// forecasts for week t see true values only.
inline EvalReport evaluate(const std::vector<Forecaster>& methods, const TimeSeriesPanel& panel,
                           std::size_t first_test) {
  if (first_test >= panel.length()) throw structural_error("evaluation period is empty");
  EvalReport r;
  r.first_week = panel.weeks[first_test];
  r.last_week = panel.weeks.back();
  r.nodes = panel.node_ids;
  const std::size_t n = panel.node_count();
  for (const Forecaster& f : methods) {
    r.methods.push_back(f.name);
    std::vector<std::vector<double>> pred(n), truth(n);
    std::vector<std::string> errors(n);
    for (std::size_t t = first_test; t < panel.length(); ++t) {
      std::vector<double> out;
      std::string failure;
      try {
        out = f.predict(panel, t);
        if (out.size() != n) failure = "forecaster returned " + std::to_string(out.size()) + " values";
      } catch (const std::exception& e) {
        failure = e.what();
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) continue;
        if (failure.empty() && !std::isfinite(out[i])) {
          errors[i] = "non-finite prediction at " + panel.weeks[t].str();
          continue;
        }
        if (!failure.empty()) {
          errors[i] = "failed at " + panel.weeks[t].str() + ": " + failure;
          continue;
        }
        pred[i].push_back(out[i]);
        truth[i].push_back(panel.values[i][t]);
        r.traces.push_back({f.name, panel.node_ids[i], panel.weeks[t], panel.values[i][t], out[i]});
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      EvalCell c{f.name, panel.node_ids[i], std::numeric_limits<double>::quiet_NaN(), {}};
      if (errors[i].empty()) c.rmse = rmse(pred[i], truth[i]);
      else c.error = errors[i];
      r.cells.push_back(std::move(c));
    }
  }

  // Published rows apply to the ten-region node numbering.
  bool ten_regions = panel.node_ids.size() == 10;
  for (std::size_t i = 0; ten_regions && i < 10; ++i) ten_regions = panel.node_ids[i] == static_cast<int>(i) + 1;
  if (ten_regions) {
    for (const auto& row : reference::kForecastRmse)
      for (int node = 1; node <= 10; ++node)
        r.references.push_back({std::string(row.method), node, row.rmse[node - 1]});
    for (const auto& c : r.cells) {
      const auto ref = reference_counterpart(c.method);
      if (!ref || !c.error.empty()) continue;
      for (const auto& row : reference::kForecastRmse)
        if (row.method == *ref) r.deltas.push_back({c.method, std::string(*ref), c.node, c.rmse - row.rmse[c.node - 1]});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Report and plot-data CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kReportHeader = "record,method,node,year,epiweek,truth,prediction,value,note";
inline constexpr std::string_view kPlotHeader = "node,year,epiweek,truth,method,prediction";

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

inline std::string report_csv(const EvalReport& r) {
  std::string out(kReportHeader);
  out += '\n';
  auto row = [&](std::string_view rec, std::string_view method, std::string node, std::string year,
                 std::string week, std::string truth, std::string pred, std::string value, std::string_view note) {
    out += std::string(rec) + ',' + csv_field(method) + ',' + node + ',' + year + ',' + week + ',' + truth +
           ',' + pred + ',' + value + ',' + csv_field(note) + '\n';
  };
  row("period", "", "", std::to_string(r.first_week.year), std::to_string(r.first_week.week), "", "", "", "first");
  row("period", "", "", std::to_string(r.last_week.year), std::to_string(r.last_week.week), "", "", "", "last");
  for (const auto& c : r.cells)
    row("rmse", c.method, std::to_string(c.node), "", "", "", "", c.error.empty() ? format_exact(c.rmse) : "",
        c.error);
  for (const auto& [method, wins] : r.win_counts())
    row("wins", method, "", "", "", "", "", std::to_string(wins), "");
  for (const auto& c : r.references)
    row("reference", c.method, std::to_string(c.node), "", "", "", "", format_exact(c.rmse), "published reference");
  for (const auto& d : r.deltas)
    row("delta", d.method, std::to_string(d.node), "", "", "", "", format_exact(d.delta),
        "computed minus published " + d.reference);
  for (const auto& t : r.traces)
    row("trace", t.method, std::to_string(t.node), std::to_string(t.week.year), std::to_string(t.week.week),
        format_exact(t.truth), format_exact(t.prediction), "", "");
  return out;
}

inline EvalReport parse_report_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kReportHeader) throw parse_error(1, "not an evaluation report");
  EvalReport r;
  bool have_first = false;
  auto num = [&](const std::string& s) {
    try {
      std::size_t p = 0;
      const double v = std::stod(s, &p);
      if (p == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw parse_error(line_no, "bad number '" + s + "'");
  };
  auto integer = [&](const std::string& s) { return static_cast<int>(num(s)); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw parse_error(line_no, "expected 9 fields");
    const std::string& rec = f[0];
    if (rec == "period") {
      const EpiWeek w{integer(f[3]), integer(f[4])};
      if (f[8] == "first") {
        r.first_week = w;
        have_first = true;
      } else {
        r.last_week = w;
      }
    } else if (rec == "rmse") {
      const int node = integer(f[2]);
      if (std::find(r.methods.begin(), r.methods.end(), f[1]) == r.methods.end()) r.methods.push_back(f[1]);
      if (std::find(r.nodes.begin(), r.nodes.end(), node) == r.nodes.end()) r.nodes.push_back(node);
      EvalCell c{f[1], node, std::numeric_limits<double>::quiet_NaN(), {}};
      if (f[7].empty()) c.error = f[8];
      else c.rmse = num(f[7]);
      r.cells.push_back(std::move(c));
    } else if (rec == "reference") {
      r.references.push_back({f[1], integer(f[2]), num(f[7])});
    } else if (rec == "delta") {
      const std::string prefix = "computed minus published ";
      r.deltas.push_back({f[1], f[8].substr(std::min(prefix.size(), f[8].size())), integer(f[2]), num(f[7])});
    } else if (rec == "trace") {
      r.traces.push_back({f[1], integer(f[2]), EpiWeek{integer(f[3]), integer(f[4])}, num(f[5]), num(f[6])});
    } else if (rec != "wins") {
      throw parse_error(line_no, "unknown record '" + rec + "'");
    }
  }
  if (!have_first) throw parse_error(line_no, "report has no evaluation period");
  return r;
}

// Long-form rows ordered by node, week, then method order of first appearance.
inline std::string emit_plot_data(const std::vector<Trace>& traces) {
  std::vector<std::string> method_order;
  for (const auto& t : traces)
    if (std::find(method_order.begin(), method_order.end(), t.method) == method_order.end())
      method_order.push_back(t.method);
  std::vector<const Trace*> rows;
  for (const auto& t : traces) rows.push_back(&t);
  auto rank = [&](const std::string& m) {
    return std::find(method_order.begin(), method_order.end(), m) - method_order.begin();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const Trace* a, const Trace* b) {
    if (a->node != b->node) return a->node < b->node;
    if (a->week != b->week) return a->week < b->week;
    return rank(a->method) < rank(b->method);
  });
  std::string out(kPlotHeader);
  out += '\n';
  for (const Trace* t : rows)
    out += std::to_string(t->node) + ',' + std::to_string(t->week.year) + ',' + std::to_string(t->week.week) + ',' +
           format_exact(t->truth) + ',' + csv_field(t->method) + ',' + format_exact(t->prediction) + '\n';
  return out;
}

inline std::string emit_plot_data(const EvalReport& r) { return emit_plot_data(r.traces); }

inline std::vector<Trace> parse_plot_data(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kPlotHeader) throw parse_error(1, "not a plot-data file");
  std::vector<Trace> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw parse_error(line_no, "expected 6 fields");
    try {
      out.push_back({f[4], std::stoi(f[0]), EpiWeek{std::stoi(f[1]), std::stoi(f[2])}, std::stod(f[3]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw parse_error(line_no, "malformed plot row");
    }
  }
  return out;
}

}  // namespace gsrnn
