#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/graph.hpp"
#include "gsrnn/rng.hpp"

namespace gsrnn {

// ---------------------------------------------------------------------------
// MMWR epidemiological weeks. Weeks run Sunday..Saturday; week 1 of a year is
// the first week with at least four days in that calendar year.
// ---------------------------------------------------------------------------

struct EpiWeek {
  int year = 0;
  int week = 0;

  auto operator<=>(const EpiWeek&) const = default;

  std::string str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%d:%d", year, week);
    return buf;
  }
};

namespace epiweek {

inline std::chrono::sys_days year_start(int year) {
  using namespace std::chrono;
  const sys_days jan1{std::chrono::year{year} / January / 1};
  const unsigned wd = weekday{jan1}.c_encoding();  // 0 = Sunday
  // Sunday on or before Jan 1 if that week holds >= 4 days of the year, else the next Sunday.
  return wd <= 3 ? jan1 - days{wd} : jan1 + days{7 - wd};
}

inline int weeks_in_year(int year) {
  return static_cast<int>((year_start(year + 1) - year_start(year)).count() / 7);
}

inline bool valid(EpiWeek w) { return w.week >= 1 && w.week <= weeks_in_year(w.year); }

inline EpiWeek next(EpiWeek w) {
  return w.week < weeks_in_year(w.year) ? EpiWeek{w.year, w.week + 1} : EpiWeek{w.year + 1, 1};
}

inline EpiWeek prev(EpiWeek w) {
  return w.week > 1 ? EpiWeek{w.year, w.week - 1} : EpiWeek{w.year - 1, weeks_in_year(w.year - 1)};
}

// Saturday that ends the week.
inline std::chrono::year_month_day end_date(EpiWeek w) {
  using namespace std::chrono;
  return year_month_day{year_start(w.year) + days{7 * (w.week - 1) + 6}};
}

// Week containing a calendar date.
inline EpiWeek of_date(std::chrono::year_month_day date) {
  using namespace std::chrono;
  const sys_days d{date};
  int y = static_cast<int>(date.year());
  if (d >= year_start(y + 1)) ++y;
  else if (d < year_start(y)) --y;
  return {y, static_cast<int>((d - year_start(y)).count() / 7) + 1};
}

// Parses "YYYY:WW".
inline EpiWeek parse(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw structural_error("expected <year>:<week>, got '" + std::string(s) + "'");
  try {
    std::size_t p1 = 0, p2 = 0;
    const std::string ys(s.substr(0, colon)), ws(s.substr(colon + 1));
    EpiWeek w{std::stoi(ys, &p1), std::stoi(ws, &p2)};
    if (p1 != ys.size() || p2 != ws.size()) throw std::invalid_argument("trailing");
    if (!valid(w)) throw structural_error("epiweek " + w.str() + " does not exist");
    return w;
  } catch (const structural_error&) {
    throw;
  } catch (const std::exception&) {
    throw structural_error("expected <year>:<week>, got '" + std::string(s) + "'");
  }
}

}  // namespace epiweek

// ---------------------------------------------------------------------------
// Panel: per-node weekly series on a gap-free epiweek index.
// ---------------------------------------------------------------------------

struct TimeSeriesPanel {
  std::vector<EpiWeek> weeks;
  std::vector<int> node_ids;               // ascending
  std::vector<std::vector<double>> values;  // [node index][week index]

  std::size_t length() const { return weeks.size(); }
  std::size_t node_count() const { return node_ids.size(); }

  std::size_t node_index(int id) const {
    const auto it = std::lower_bound(node_ids.begin(), node_ids.end(), id);
    if (it == node_ids.end() || *it != id)
      throw structural_error("node " + std::to_string(id) + " not present in panel");
    return static_cast<std::size_t>(it - node_ids.begin());
  }

  std::size_t week_index(EpiWeek w) const {
    const auto it = std::lower_bound(weeks.begin(), weeks.end(), w);
    if (it == weeks.end() || *it != w)
      throw structural_error("week " + w.str() + " outside the panel index");
    return static_cast<std::size_t>(it - weeks.begin());
  }

  const std::vector<double>& series(int id) const { return values[node_index(id)]; }

  // Sub-panel over week indices [begin, end).
  TimeSeriesPanel slice(std::size_t begin, std::size_t end) const {
    TimeSeriesPanel p;
    p.node_ids = node_ids;
    p.weeks.assign(weeks.begin() + begin, weeks.begin() + end);
    for (const auto& s : values) p.values.emplace_back(s.begin() + begin, s.begin() + end);
    return p;
  }

  void validate() const {
    for (std::size_t t = 1; t < weeks.size(); ++t)
      if (weeks[t] != epiweek::next(weeks[t - 1]))
        throw gap_error("weekly index gap between " + weeks[t - 1].str() + " and " + weeks[t].str());
    if (values.size() != node_ids.size()) throw structural_error("panel node count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != weeks.size())
        throw gap_error("node " + std::to_string(node_ids[i]) + " series length mismatch");
      for (double v : values[i])
        if (!std::isfinite(v) || v < 0.0)
          throw structural_error("node " + std::to_string(node_ids[i]) +
                                 " has a non-finite or negative activity value");
    }
  }

  friend bool operator==(const TimeSeriesPanel&, const TimeSeriesPanel&) = default;
};

inline constexpr std::string_view kPanelHeader = "region_id,year,epiweek,activity";

inline std::string format_activity(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline TimeSeriesPanel load_panel(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw parse_error(1, "empty panel file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPanelHeader)
    throw parse_error(1, "expected header '" + std::string(kPanelHeader) + "'");

  std::map<int, std::map<EpiWeek, double>> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 4) throw parse_error(line_no, "expected 4 fields");
    auto to_int = [&](const std::string& s, const char* what) {
      try {
        std::size_t p = 0;
        const int v = std::stoi(s, &p);
        if (p == s.size()) return v;
      } catch (const std::exception&) {
      }
      throw parse_error(line_no, std::string("non-numeric ") + what + " '" + s + "'");
    };
    const int region = to_int(f[0], "region_id");
    const EpiWeek w{to_int(f[1], "year"), to_int(f[2], "epiweek")};
    if (!epiweek::valid(w)) throw parse_error(line_no, "epiweek " + w.str() + " does not exist");
    double v = 0.0;
    try {
      std::size_t p = 0;
      v = std::stod(f[3], &p);
      if (p != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw parse_error(line_no, "non-numeric activity '" + f[3] + "'");
    }
    if (!std::isfinite(v) || v < 0.0)
      throw parse_error(line_no, "activity must be finite and non-negative");
    if (!cells[region].emplace(w, v).second)
      throw duplicate_error("duplicate cell for region " + std::to_string(region) + " week " +
                            w.str() + " (line " + std::to_string(line_no) + ")");
  }
  if (cells.empty()) throw structural_error("panel has no rows");

  EpiWeek first = cells.begin()->second.begin()->first;
  EpiWeek last = first;
  for (const auto& [_, series] : cells) {
    first = std::min(first, series.begin()->first);
    last = std::max(last, series.rbegin()->first);
  }
  TimeSeriesPanel p;
  for (EpiWeek w = first;; w = epiweek::next(w)) {
    p.weeks.push_back(w);
    if (w == last) break;
  }
  for (const auto& [region, series] : cells) {
    p.node_ids.push_back(region);
    std::vector<double> s;
    s.reserve(p.weeks.size());
    for (EpiWeek w : p.weeks) {
      const auto it = series.find(w);
      if (it == series.end())
        throw gap_error("missing cell: region " + std::to_string(region) + " week " + w.str());
      s.push_back(it->second);
    }
    p.values.push_back(std::move(s));
  }
  p.validate();
  return p;
}

// Canonical form: rows sorted by (region_id, year, epiweek), activity as %.6g.
inline std::string save_panel(const TimeSeriesPanel& p) {
  std::string out(kPanelHeader);
  out += '\n';
  for (std::size_t i = 0; i < p.node_count(); ++i)
    for (std::size_t t = 0; t < p.length(); ++t) {
      out += std::to_string(p.node_ids[i]) + ',' + std::to_string(p.weeks[t].year) + ',' +
             std::to_string(p.weeks[t].week) + ',' + format_activity(p.values[i][t]) + '\n';
    }
  return out;
}

// train = weeks strictly before `first_test`, test = from `first_test` on.
inline std::pair<TimeSeriesPanel, TimeSeriesPanel> split(const TimeSeriesPanel& p, EpiWeek first_test) {
  if (p.length() == 0 || first_test < p.weeks.front() || first_test > p.weeks.back())
    throw structural_error("split week " + first_test.str() + " outside the panel index");
  const std::size_t k = p.week_index(first_test);
  if (k == 0) throw structural_error("split at the first week leaves an empty training panel");
  return {p.slice(0, k), p.slice(k, p.length())};
}

// ---------------------------------------------------------------------------
// Per-node min-max scaling fitted on a training panel.
// ---------------------------------------------------------------------------

struct Scaler {
  std::vector<double> min;
  std::vector<double> max;

  static Scaler fit(const TimeSeriesPanel& train) {
    if (train.length() == 0) throw structural_error("cannot fit a scaler on an empty panel");
    Scaler s;
    for (const auto& series : train.values) {
      const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
      s.min.push_back(*lo);
      s.max.push_back(*hi);
    }
    return s;
  }

  // Degenerate range maps to the constant 0.5.
  double transform(std::size_t node, double x) const {
    const double range = max.at(node) - min.at(node);
    return range > 0.0 ? (x - min[node]) / range : 0.5;
  }
  double inverse(std::size_t node, double y) const {
    const double range = max.at(node) - min.at(node);
    return range > 0.0 ? min[node] + y * range : min[node];
  }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

// ---------------------------------------------------------------------------
// Look-back windows
// ---------------------------------------------------------------------------

struct Sample {
  std::size_t t = 0;  // panel week index of the target
  EpiWeek week;
  std::vector<std::vector<double>> features;  // [node][look_back], scaled, oldest first
  std::vector<double> target;                 // [node], original units
  std::vector<double> target_scaled;          // [node]
};

struct WindowedDataset {
  std::size_t look_back = 2;
  std::vector<Sample> samples;
  std::size_t size() const { return samples.size(); }
};

// One sample per target week t in [first_target, panel end), features from t-look_back..t-1.
inline WindowedDataset make_windows(const TimeSeriesPanel& p, std::size_t look_back,
                                    const Scaler& scaler, std::size_t first_target = 0) {
  if (look_back == 0) throw structural_error("look_back must be >= 1");
  if (p.length() <= look_back)
    throw structural_error("panel of " + std::to_string(p.length()) +
                           " weeks is too short for look_back " + std::to_string(look_back));
  if (scaler.min.size() != p.node_count())
    throw structural_error("scaler node count does not match panel");
  WindowedDataset ds{look_back, {}};
  for (std::size_t t = std::max(first_target, look_back); t < p.length(); ++t) {
    Sample s;
    s.t = t;
    s.week = p.weeks[t];
    for (std::size_t i = 0; i < p.node_count(); ++i) {
      std::vector<double> f(look_back);
      for (std::size_t k = 0; k < look_back; ++k)
        f[k] = scaler.transform(i, p.values[i][t - look_back + k]);
      s.features.push_back(std::move(f));
      s.target.push_back(p.values[i][t]);
      s.target_scaled.push_back(scaler.transform(i, p.values[i][t]));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic coupled panel
//   x_i(t) = max(0, base_i + amp_i sin(2 pi t / 52 + phase_i)
//                   + coupling * mean_{j ~ i} x_j(t-1) + noise_sd * eps_i(t))
// with base_i, amp_i ~ U[0.5, 1.5], phase_i ~ U[0, 2 pi).
// ---------------------------------------------------------------------------

struct SynthOptions {
  double period = 52.0;
  EpiWeek start{2000, 1};
};

inline TimeSeriesPanel synth_panel(const RegionGraph& g, std::size_t weeks, double coupling,
                                   double noise_sd, std::uint64_t seed, SynthOptions opt = {}) {
  if (weeks <= 10) throw structural_error("synthetic panel needs more than 10 weeks");
  if (!(coupling >= 0.0 && coupling < 1.0)) throw structural_error("coupling must lie in [0, 1)");
  if (!(noise_sd >= 0.0)) throw structural_error("noise sd must be non-negative");
  const int n = g.node_count();
  if (n == 0) throw structural_error("synthetic panel needs a non-empty graph");
  SplitMix64 rng(seed);
  std::vector<double> base(n), amp(n), phase(n);
  for (int i = 0; i < n; ++i) {
    base[i] = rng.uniform(0.5, 1.5);
    amp[i] = rng.uniform(0.5, 1.5);
    phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<std::vector<int>> nb(n);
  for (int i = 0; i < n; ++i) nb[i] = g.neighbors(i + 1);

  TimeSeriesPanel p;
  for (int i = 1; i <= n; ++i) p.node_ids.push_back(i);
  p.values.assign(n, std::vector<double>(weeks, 0.0));
  EpiWeek w = opt.start;
  for (std::size_t t = 0; t < weeks; ++t, w = epiweek::next(w)) {
    p.weeks.push_back(w);
    for (int i = 0; i < n; ++i) {
      double lag = 0.0;
      if (t > 0 && !nb[i].empty()) {
        for (int j : nb[i]) lag += p.values[j - 1][t - 1];
        lag /= static_cast<double>(nb[i].size());
      }
      const double season =
          amp[i] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / opt.period + phase[i]);
      const double noise = noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0;
      p.values[i][t] = std::max(0.0, base[i] + season + coupling * lag + noise);
    }
  }
  return p;
}

// Total activity per graph node (ids 1..N) over the panel.
inline std::vector<double> activity_totals(const TimeSeriesPanel& p, const RegionGraph& g) {
  if (p.length() == 0) throw structural_error("classify_nodes: empty panel");
  std::vector<double> totals;
  for (int id = 1; id <= g.node_count(); ++id) {
    double s = 0.0;
    for (double v : p.series(id)) s += v;
    totals.push_back(s);
  }
  return totals;
}

// Activity classes from the (training) panel.
inline ClassAssignment classify_nodes(const TimeSeriesPanel& train, const RegionGraph& g, int classes) {
  return classify_totals(activity_totals(train, g), classes);
}

}  // namespace gsrnn
