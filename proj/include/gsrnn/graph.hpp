#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/rng.hpp"

namespace gsrnn {

struct Edge {
  int src = 0;
  int dst = 0;
  double weight = 1.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Weighted directed graph over nodes 1..N without self-loops.
class RegionGraph {
 public:
  RegionGraph() = default;
  explicit RegionGraph(int node_count) : labels_(static_cast<std::size_t>(node_count)) {
    if (node_count < 0) throw structural_error("negative node count");
    for (int i = 1; i <= node_count; ++i) labels_[i - 1] = "Node " + std::to_string(i);
  }

  int node_count() const { return static_cast<int>(labels_.size()); }

  // Adds (or re-weights) the directed edge src -> dst.
  void add_edge(int src, int dst, double weight = 1.0) {
    check_node(src);
    check_node(dst);
    if (src == dst) throw structural_error("self-loop on node " + std::to_string(src));
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw structural_error("edge weight must be finite and non-negative");
    for (Edge& e : edges_)
      if (e.src == src && e.dst == dst) {
        e.weight = weight;
        return;
      }
    edges_.push_back({src, dst, weight});
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
    });
  }

  void add_undirected(int a, int b, double weight = 1.0) {
    add_edge(a, b, weight);
    add_edge(b, a, weight);
  }

  const std::vector<Edge>& edges() const { return edges_; }

  std::vector<Edge> out_edges(int node) const {
    std::vector<Edge> out;
    for (const Edge& e : edges_)
      if (e.src == node) out.push_back(e);
    return out;
  }

  // Distinct neighbors ignoring direction.
  std::vector<int> neighbors(int node) const {
    std::set<int> s;
    for (const Edge& e : edges_) {
      if (e.src == node) s.insert(e.dst);
      if (e.dst == node) s.insert(e.src);
    }
    return {s.begin(), s.end()};
  }

  int degree(int node) const { return static_cast<int>(neighbors(node).size()); }

  int max_degree() const {
    int m = 0;
    for (int i = 1; i <= node_count(); ++i) m = std::max(m, degree(i));
    return m;
  }

  const std::string& label(int node) const {
    check_node(node);
    return labels_[node - 1];
  }
  void set_label(int node, std::string label) {
    check_node(node);
    labels_[node - 1] = std::move(label);
  }

  // FNV-1a over a canonical text rendering of nodes, labels and weighted edges.
  std::uint64_t content_hash() const {
    std::string text = "nodes " + std::to_string(node_count()) + "\n";
    for (int i = 1; i <= node_count(); ++i) text += "label " + std::to_string(i) + " " + label(i) + "\n";
    char buf[64];
    for (const Edge& e : edges_) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", e.src, e.dst, e.weight);
      text += buf;
    }
    return fnv1a64(text.data(), text.size());
  }

  friend bool operator==(const RegionGraph&, const RegionGraph&) = default;

 private:
  void check_node(int node) const {
    if (node < 1 || node > node_count())
      throw structural_error("node id " + std::to_string(node) + " outside 1.." +
                             std::to_string(node_count()));
  }

  std::vector<std::string> labels_;
  std::vector<Edge> edges_;
};

// Parses the edge-list format: `src,dst` per line (both directions added),
// `node,<id>[,<label>]` to declare a node, `#` starts a comment.
inline RegionGraph parse_graph(std::string_view text) {
  struct NodeDecl {
    int id;
    std::string label;
  };
  std::vector<std::pair<int, int>> pairs;
  std::vector<NodeDecl> decls;
  int max_id = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  auto parse_id = [&](const std::string& tok) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw parse_error(line_no, "expected a node id, got '" + tok + "'");
    }
    if (pos != tok.size() || v < 1) throw parse_error(line_no, "invalid node id '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() >= 2 && fields[0] == "node") {
      const int id = parse_id(fields[1]);
      std::string label;
      for (std::size_t k = 2; k < fields.size(); ++k) label += (k > 2 ? "," : "") + fields[k];
      decls.push_back({id, label});
      max_id = std::max(max_id, id);
      continue;
    }
    if (fields.size() != 2) throw parse_error(line_no, "expected 'src,dst' or 'node,<id>'");
    const int a = parse_id(fields[0]);
    const int b = parse_id(fields[1]);
    if (a == b) throw parse_error(line_no, "self-loop on node " + std::to_string(a));
    pairs.emplace_back(a, b);
    max_id = std::max({max_id, a, b});
  }
  RegionGraph g(max_id);
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (const auto& d : decls) {
    seen[d.id] = true;
    if (!d.label.empty()) g.set_label(d.id, d.label);
  }
  for (auto [a, b] : pairs) {
    seen[a] = seen[b] = true;
    g.add_undirected(a, b);
  }
  for (int i = 1; i <= max_id; ++i)
    if (!seen[i])
      throw structural_error("graph node ids must be contiguous: node " + std::to_string(i) +
                             " is never mentioned");
  return g;
}

// Edge weights all set to 1/M_e, M_e the maximum undirected degree.
inline RegionGraph normalize_weights(const RegionGraph& g) {
  if (g.node_count() == 0) throw structural_error("normalize_weights: empty graph");
  if (g.edges().empty()) throw structural_error("normalize_weights: graph has no edges");
  const double w = 1.0 / static_cast<double>(g.max_degree());
  RegionGraph out = g;
  for (const Edge& e : g.edges()) out.add_edge(e.src, e.dst, w);
  return out;
}

// ---------------------------------------------------------------------------
// Activity classes and edge types
// ---------------------------------------------------------------------------

struct ClassAssignment {
  int classes = 2;
  std::vector<int> of_node;  // index node-1

  int operator()(int node) const {
    if (node < 1 || static_cast<std::size_t>(node) > of_node.size())
      throw structural_error("node " + std::to_string(node) + " missing from class assignment");
    return of_node[node - 1];
  }
  std::size_t node_count() const { return of_node.size(); }

  std::vector<int> members(int cls) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < of_node.size(); ++i)
      if (of_node[i] == cls) out.push_back(static_cast<int>(i) + 1);
    return out;
  }
  // Active set H (class >= 1) and inactive set L (class 0).
  std::vector<int> active() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < of_node.size(); ++i)
      if (of_node[i] >= 1) out.push_back(static_cast<int>(i) + 1);
    return out;
  }
  std::vector<int> inactive() const { return members(0); }

  friend bool operator==(const ClassAssignment&, const ClassAssignment&) = default;
};

// Unordered pair of endpoint classes.
struct EdgeType {
  int lo = 0;
  int hi = 0;

  static EdgeType of(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

  bool touches(int cls) const { return lo == cls || hi == cls; }

  // "H-H" / "H-L" / "L-L" for two classes, "c<hi>-c<lo>" otherwise.
  std::string label(int classes) const {
    if (classes <= 2) {
      auto n = [](int c) { return c >= 1 ? "H" : "L"; };
      return std::string(n(hi)) + "-" + n(lo);
    }
    return "c" + std::to_string(hi) + "-c" + std::to_string(lo);
  }

  auto operator<=>(const EdgeType&) const = default;
};

struct TypedEdge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
  EdgeType type;
  friend bool operator==(const TypedEdge&, const TypedEdge&) = default;
};

// class = min(C-1, floor(C (|v| - m) / (M - m + 1e-6))) over per-node activity totals.
inline ClassAssignment classify_totals(const std::vector<double>& totals, int classes) {
  if (classes < 1) throw structural_error("number of classes must be >= 1");
  if (totals.empty()) throw structural_error("classify_nodes: no nodes");
  const auto [mn, mx] = std::minmax_element(totals.begin(), totals.end());
  const double m = *mn;
  const double M = *mx;
  ClassAssignment a{classes, std::vector<int>(totals.size(), 0)};
  for (std::size_t i = 0; i < totals.size(); ++i) {
    if (M == m) break;
    const double r = static_cast<double>(classes) * (totals[i] - m) / (M - m + 1e-6);
    a.of_node[i] = std::min(classes - 1, static_cast<int>(std::floor(r)));
  }
  return a;
}

inline std::vector<TypedEdge> type_edges(const RegionGraph& g, const ClassAssignment& a) {
  if (a.node_count() < static_cast<std::size_t>(g.node_count()))
    throw structural_error("class assignment covers " + std::to_string(a.node_count()) +
                           " nodes but the graph has " + std::to_string(g.node_count()));
  std::vector<TypedEdge> out;
  out.reserve(g.edges().size());
  for (const Edge& e : g.edges())
    out.push_back({e.src, e.dst, e.weight, EdgeType::of(a(e.src), a(e.dst))});
  return out;
}

}  // namespace gsrnn
