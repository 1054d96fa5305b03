#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/tensor.hpp"

namespace gsrnn {

enum class PenaltyKind { none, l1, tl1 };

inline std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::tl1: return "tl1";
  }
  return "none";
}

inline PenaltyKind parse_penalty_kind(std::string_view s) {
  if (s == "none") return PenaltyKind::none;
  if (s == "l1") return PenaltyKind::l1;
  if (s == "tl1") return PenaltyKind::tl1;
  throw structural_error("unknown penalty '" + std::string(s) + "' (expected none, l1 or tl1)");
}

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::none;
  double alpha = 5e-8;  // multiplier on the penalty in the training loss
  double a = 1.0;       // transformed-l1 shape

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw structural_error("penalty alpha must be >= 0");
    if (kind == PenaltyKind::tl1 && !(a > 0.0)) throw structural_error("tl1 shape a must be > 0");
  }

  friend bool operator==(const PenaltyConfig&, const PenaltyConfig&) = default;
};

// Transformed l1: (a+1)|x| / (a+|x|).
inline double tl1_rho(double x, double a) {
  const double ax = std::abs(x);
  return (a + 1.0) * ax / (a + ax);
}

inline double tl1_rho_derivative(double x, double a) {
  if (x == 0.0) return 0.0;
  const double d = a + std::abs(x);
  return (a + 1.0) * a / (d * d) * (x > 0.0 ? 1.0 : -1.0);
}

// Unweighted penalty P(w) summed over `matrix` tensors; alpha is not applied.
inline double penalty_value(const ParamSet& weights, const PenaltyConfig& cfg) {
  cfg.validate();
  if (cfg.kind == PenaltyKind::none) return 0.0;
  double total = 0.0;
  for (const auto& [name, e] : weights) {
    if (e.kind != ParamKind::matrix) continue;
    for (double x : e.tensor.values())
      total += cfg.kind == PenaltyKind::l1 ? std::abs(x) : tl1_rho(x, cfg.a);
  }
  return total;
}

// Elementwise subgradient of penalty_value; 0 at x = 0 and on biases.
inline ParamSet penalty_subgradient(const ParamSet& weights, const PenaltyConfig& cfg) {
  cfg.validate();
  ParamSet g = weights.zeros_like();
  if (cfg.kind == PenaltyKind::none) return g;
  for (const auto& [name, e] : weights) {
    if (e.kind != ParamKind::matrix) continue;
    Tensor& out = g[name];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = e.tensor[i];
      if (cfg.kind == PenaltyKind::l1)
        out[i] = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      else
        out[i] = tl1_rho_derivative(x, cfg.a);
    }
  }
  return g;
}

// Sets every matrix entry with |w| < theta to exactly zero.
inline ParamSet hard_threshold(ParamSet weights, double theta) {
  if (!(theta >= 0.0)) throw structural_error("threshold must be >= 0");
  for (auto& [name, e] : weights) {
    if (e.kind != ParamKind::matrix) continue;
    for (double& x : e.tensor.values())
      if (std::abs(x) < theta) x = 0.0;
  }
  return weights;
}

struct SparsityReport {
  struct Row {
    std::string tensor;
    std::size_t total = 0;
    std::size_t below = 0;
    double fraction() const { return total ? static_cast<double>(below) / static_cast<double>(total) : 0.0; }
  };

  double threshold = 1e-3;
  std::vector<Row> tensors;  // matrix tensors, name order
  Row aggregate{"ALL"};

  double fraction() const { return aggregate.fraction(); }

  std::string csv() const {
    std::string out = "tensor_name,total,below_threshold,fraction\n";
    char buf[64];
    auto put = [&](const Row& r) {
      std::snprintf(buf, sizeof buf, "%.6f", r.fraction());
      out += r.tensor + "," + std::to_string(r.total) + "," + std::to_string(r.below) + "," + buf + "\n";
    };
    for (const Row& r : tensors) put(r);
    put(aggregate);
    return out;
  }
};

// Fractions of matrix entries with |w| < theta, per tensor and count-weighted overall.
inline SparsityReport sparsity_report(const ParamSet& weights, double theta) {
  if (!(theta >= 0.0)) throw structural_error("threshold must be >= 0");
  SparsityReport r;
  r.threshold = theta;
  for (const auto& [name, e] : weights) {
    if (e.kind != ParamKind::matrix) continue;
    SparsityReport::Row row{name, e.tensor.size(), 0};
    for (double x : e.tensor.values())
      if (std::abs(x) < theta) ++row.below;
    r.aggregate.total += row.total;
    r.aggregate.below += row.below;
    r.tensors.push_back(std::move(row));
  }
  return r;
}

}  // namespace gsrnn
