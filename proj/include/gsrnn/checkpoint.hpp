#pragma once

// Checkpoint layout (all text, '\n' line endings):
//
//   GSRNN-CHECKPOINT
//   format_version: 1
//   graph_hash: <16 hex digits, FNV-1a of the normalized graph>
//   payload_bytes: <decimal length of the payload>
//   payload_fnv1a: <16 hex digits>
//   <empty line>
//   <payload: one JSON document>
//
// Every double in the payload is written as 16 hex digits of its IEEE-754
// bit pattern, most significant byte first, so a load reproduces the exact
// bits regardless of host endianness or float formatting.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gsrnn/errors.hpp"
#include "gsrnn/model.hpp"

namespace gsrnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "GSRNN-CHECKPOINT";

namespace ckpt_detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(std::string_view s) {
  if (s.size() != 16) throw checkpoint_corrupt_error("bad hex word '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw checkpoint_corrupt_error("bad hex digit in '" + std::string(s) + "'");
  }
  return v;
}

inline std::string encode(double d) { return hex64(std::bit_cast<std::uint64_t>(d)); }
inline double decode(std::string_view s) { return std::bit_cast<double>(parse_hex64(s)); }

inline std::string encode(std::span<const double> xs) {
  std::string out;
  out.reserve(xs.size() * 16);
  for (double x : xs) out += encode(x);
  return out;
}

inline std::vector<double> decode_array(std::string_view s) {
  if (s.size() % 16 != 0) throw checkpoint_corrupt_error("truncated value array");
  std::vector<double> out;
  out.reserve(s.size() / 16);
  for (std::size_t i = 0; i < s.size(); i += 16) out.push_back(decode(s.substr(i, 16)));
  return out;
}

}  // namespace ckpt_detail

inline std::string save_checkpoint(const GSRNNModel& m) {
  using nlohmann::json;
  using namespace ckpt_detail;
  for (const auto& [name, e] : m.params)
    if (!e.tensor.all_finite()) throw numeric_error("cannot checkpoint non-finite tensor '" + name + "'");

  json doc;
  doc["arch"] = {{"look_back", m.arch.look_back},
                 {"edge_hidden", m.arch.edge_hidden},
                 {"node_hidden", m.arch.node_hidden}};
  json labels = json::array();
  for (int i = 1; i <= m.graph.node_count(); ++i) labels.push_back(m.graph.label(i));
  json edges = json::array();
  for (const Edge& e : m.graph.edges()) edges.push_back({e.src, e.dst, encode(e.weight)});
  doc["graph"] = {{"nodes", m.graph.node_count()}, {"labels", labels}, {"edges", edges}};
  doc["classes"] = {{"count", m.classes.classes}, {"of_node", m.classes.of_node}};
  doc["scaler"] = {{"min", encode(m.scaler.min)}, {"max", encode(m.scaler.max)}};
  doc["seed"] = hex64(m.seed);
  doc["training"] = {{"epochs", m.training.epochs},
                     {"lr", encode(m.training.lr)},
                     {"batch_size", m.training.batch_size},
                     {"penalty",
                      {{"kind", to_string(m.training.penalty.kind)},
                       {"alpha", encode(m.training.penalty.alpha)},
                       {"a", encode(m.training.penalty.a)}}},
                     {"loss_history", encode(m.training.loss_history)}};
  json params = json::array();
  for (const auto& [name, e] : m.params)
    params.push_back({{"name", name},
                      {"kind", to_string(e.kind)},
                      {"shape", e.tensor.shape()},
                      {"data", encode(e.tensor.values())}});
  doc["params"] = params;

  const std::string payload = doc.dump();
  std::string out(kCheckpointMagic);
  out += "\nformat_version: " + std::to_string(kCheckpointVersion) + "\n";
  out += "graph_hash: " + hex64(m.graph.content_hash()) + "\n";
  out += "payload_bytes: " + std::to_string(payload.size()) + "\n";
  out += "payload_fnv1a: " + hex64(fnv1a64(payload.data(), payload.size())) + "\n\n";
  out += payload;
  return out;
}

struct CheckpointExpectations {
  std::optional<RegionGraph> graph;  // normalized graph the checkpoint must have been trained on
  std::optional<GSRNNArch> arch;
};

inline GSRNNModel load_checkpoint(std::string_view bytes, const CheckpointExpectations& expect = {}) {
  using nlohmann::json;
  using namespace ckpt_detail;

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw checkpoint_corrupt_error("truncated checkpoint header");
    const std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto field = [&](std::string_view key) {
    const std::string_view line = next_line();
    const std::string prefix = std::string(key) + ": ";
    if (line.substr(0, prefix.size()) != prefix)
      throw checkpoint_corrupt_error("expected header field '" + std::string(key) + "'");
    return std::string(line.substr(prefix.size()));
  };

  if (next_line() != kCheckpointMagic) throw checkpoint_corrupt_error("not a GSRNN checkpoint");
  const std::string version = field("format_version");
  if (version != std::to_string(kCheckpointVersion))
    throw checkpoint_version_error("checkpoint format_version " + version + " is not supported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t graph_hash = parse_hex64(field("graph_hash"));
  std::size_t payload_bytes = 0;
  try {
    payload_bytes = std::stoull(field("payload_bytes"));
  } catch (const std::logic_error&) {
    throw checkpoint_corrupt_error("bad payload_bytes");
  }
  const std::uint64_t checksum = parse_hex64(field("payload_fnv1a"));
  if (!next_line().empty()) throw checkpoint_corrupt_error("missing header terminator");
  const std::string_view payload = bytes.substr(pos);
  if (payload.size() != payload_bytes)
    throw checkpoint_corrupt_error("payload is " + std::to_string(payload.size()) + " bytes, header says " +
                                   std::to_string(payload_bytes));
  if (fnv1a64(payload.data(), payload.size()) != checksum)
    throw checkpoint_corrupt_error("payload checksum mismatch");

  if (expect.graph && expect.graph->content_hash() != graph_hash)
    throw checkpoint_hash_error("checkpoint graph hash " + hex64(graph_hash) +
                                " does not match the supplied graph " + hex64(expect.graph->content_hash()));

  GSRNNModel m;
  try {
    const json doc = json::parse(payload);
    GSRNNArch arch;
    arch.look_back = doc.at("arch").at("look_back").get<std::size_t>();
    arch.edge_hidden = doc.at("arch").at("edge_hidden").get<std::vector<std::size_t>>();
    arch.node_hidden = doc.at("arch").at("node_hidden").get<std::vector<std::size_t>>();
    if (expect.arch && *expect.arch != arch)
      throw checkpoint_shape_error("checkpoint architecture does not match the requested one");

    const json& g = doc.at("graph");
    RegionGraph graph(g.at("nodes").get<int>());
    const auto labels = g.at("labels").get<std::vector<std::string>>();
    if (labels.size() != static_cast<std::size_t>(graph.node_count()))
      throw checkpoint_corrupt_error("label count does not match node count");
    for (std::size_t i = 0; i < labels.size(); ++i) graph.set_label(static_cast<int>(i) + 1, labels[i]);
    for (const json& e : g.at("edges"))
      graph.add_edge(e.at(0).get<int>(), e.at(1).get<int>(), decode(e.at(2).get<std::string>()));
    if (graph.content_hash() != graph_hash)
      throw checkpoint_corrupt_error("embedded graph does not match the header hash");

    ClassAssignment classes{doc.at("classes").at("count").get<int>(),
                            doc.at("classes").at("of_node").get<std::vector<int>>()};
    const std::uint64_t seed = parse_hex64(doc.at("seed").get<std::string>());
    m = build_model(graph, classes, arch, seed);

    m.scaler.min = decode_array(doc.at("scaler").at("min").get<std::string>());
    m.scaler.max = decode_array(doc.at("scaler").at("max").get<std::string>());

    const json& t = doc.at("training");
    m.training.epochs = t.at("epochs").get<std::size_t>();
    m.training.lr = decode(t.at("lr").get<std::string>());
    m.training.batch_size = t.at("batch_size").get<std::size_t>();
    m.training.penalty.kind = parse_penalty_kind(t.at("penalty").at("kind").get<std::string>());
    m.training.penalty.alpha = decode(t.at("penalty").at("alpha").get<std::string>());
    m.training.penalty.a = decode(t.at("penalty").at("a").get<std::string>());
    m.training.loss_history = decode_array(t.at("loss_history").get<std::string>());

    ParamSet params;
    for (const json& p : doc.at("params")) {
      const std::string kind = p.at("kind").get<std::string>();
      params.add(p.at("name").get<std::string>(),
                 Tensor(p.at("shape").get<std::vector<std::size_t>>(),
                        decode_array(p.at("data").get<std::string>())),
                 kind == "bias" ? ParamKind::bias : ParamKind::matrix);
    }
    if (!params.same_structure(m.params))
      throw checkpoint_shape_error("checkpoint tensors do not match the architecture they declare");
    m.params = std::move(params);
  } catch (const checkpoint_error&) {
    throw;
  } catch (const json::exception& e) {
    throw checkpoint_corrupt_error(std::string("malformed checkpoint payload: ") + e.what());
  } catch (const structural_error& e) {
    throw checkpoint_corrupt_error(std::string("inconsistent checkpoint payload: ") + e.what());
  }
  return m;
}

}  // namespace gsrnn
