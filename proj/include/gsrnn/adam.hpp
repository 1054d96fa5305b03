#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "gsrnn/errors.hpp"
#include "gsrnn/tensor.hpp"

namespace gsrnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t t = 0;
  AdamConfig cfg;

  static AdamState fresh(const ParamSet& like, AdamConfig cfg = {}) {
    return AdamState{like.zeros_like(), like.zeros_like(), 0, cfg};
  }
};

// In-place bias-corrected Adam step.
inline void adam_update(ParamSet& params, const ParamSet& grads, AdamState& state) {
  params.require_same_structure(grads, "adam_step grads");
  if (state.m.empty() && state.v.empty() && state.t == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  params.require_same_structure(state.m, "adam_step first moment");
  params.require_same_structure(state.v, "adam_step second moment");

  const auto& c = state.cfg;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));

  auto m_it = state.m.begin();
  auto v_it = state.v.begin();
  auto g_it = grads.begin();
  for (auto p_it = params.begin(); p_it != params.end(); ++p_it, ++m_it, ++v_it, ++g_it) {
    Tensor& p = p_it->second.tensor;
    Tensor& m = m_it->second.tensor;
    Tensor& v = v_it->second.tensor;
    const Tensor& g = g_it->second.tensor;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

inline std::pair<ParamSet, AdamState> adam_step(ParamSet params, const ParamSet& grads,
                                                AdamState state) {
  adam_update(params, grads, state);
  return {std::move(params), std::move(state)};
}

}  // namespace gsrnn
