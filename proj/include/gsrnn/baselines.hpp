#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/model.hpp"
#include "gsrnn/panel.hpp"
#include "gsrnn/rnn.hpp"

namespace gsrnn {

// ---------------------------------------------------------------------------
// AR(p):  X_t = mu + sum_i phi_i X_{t-i} + eps
// ---------------------------------------------------------------------------

struct ARModel {
  std::size_t p = 1;
  double mu = 0.0;
  std::vector<double> phi;  // phi[0] multiplies X_{t-1}
  double residual_variance = 0.0;
};

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot falls below rel_tol times the largest |A| entry.
inline bool solve_linear(std::vector<double> a, std::vector<double> b, std::size_t n,
                         std::vector<double>& x, double rel_tol = 1e-12) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) <= rel_tol * scale) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return true;
}

// Ordinary least squares on the lagged regression, via the normal equations.
inline ARModel fit_ar(std::span<const double> series, std::size_t p) {
  if (p < 1) throw structural_error("AR order must be >= 1");
  if (series.size() <= p + 1)
    throw structural_error("series of length " + std::to_string(series.size()) +
                           " is too short for AR(" + std::to_string(p) + ")");
  const std::size_t k = p + 1;
  std::vector<double> xtx(k * k, 0.0), xty(k, 0.0), row(k);
  for (std::size_t t = p; t < series.size(); ++t) {
    row[0] = 1.0;
    for (std::size_t i = 1; i <= p; ++i) row[i] = series[t - i];
    for (std::size_t r = 0; r < k; ++r) {
      xty[r] += row[r] * series[t];
      for (std::size_t c = 0; c < k; ++c) xtx[r * k + c] += row[r] * row[c];
    }
  }
  std::vector<double> beta;
  if (!solve_linear(xtx, xty, k, beta))
    throw degenerate_series_error("AR(" + std::to_string(p) +
                                  ") normal equations are singular (constant or collinear series)");
  ARModel m;
  m.p = p;
  m.mu = beta[0];
  m.phi.assign(beta.begin() + 1, beta.end());
  double ssr = 0.0;
  for (std::size_t t = p; t < series.size(); ++t) {
    double pred = m.mu;
    for (std::size_t i = 1; i <= p; ++i) pred += m.phi[i - 1] * series[t - i];
    ssr += (series[t] - pred) * (series[t] - pred);
  }
  const std::size_t rows = series.size() - p;
  m.residual_variance = ssr / static_cast<double>(rows > k ? rows - k : rows);
  return m;
}

// One-step forecast; history.back() is X_{t-1}.
inline double predict_ar(const ARModel& m, std::span<const double> history) {
  if (history.size() < m.p)
    throw structural_error("AR(" + std::to_string(m.p) + ") needs " + std::to_string(m.p) +
                           " history values, got " + std::to_string(history.size()));
  double y = m.mu;
  for (std::size_t i = 1; i <= m.p; ++i) y += m.phi[i - 1] * history[history.size() - i];
  return y;
}

// ---------------------------------------------------------------------------
// Plain per-node LSTM on the node's own look-back windows.
// ---------------------------------------------------------------------------

struct LSTMBaselineSpec {
  std::size_t look_back = 2;
  std::vector<std::size_t> hidden{10, 40, 10};
};

class LSTMForecaster {
 public:
  LSTMForecaster(LSTMBaselineSpec spec, double min, double max, std::uint64_t seed)
      : spec_(std::move(spec)), stack_{"lstm", 1, spec_.hidden, 1}, min_(min), max_(max) {
    SplitMix64 rng(derive_seed(seed, 0x4C53544DULL));
    init_stack(params_, stack_, rng);
  }

  double scale(double x) const { return max_ > min_ ? (x - min_) / (max_ - min_) : 0.5; }
  double unscale(double y) const { return max_ > min_ ? min_ + y * (max_ - min_) : min_; }

  // Forecast from the most recent look_back values (original units, oldest first).
  double predict(std::span<const double> recent) const {
    if (recent.size() < spec_.look_back)
      throw structural_error("LSTM baseline needs " + std::to_string(spec_.look_back) + " history values");
    std::vector<std::vector<double>> seq;
    for (std::size_t k = recent.size() - spec_.look_back; k < recent.size(); ++k)
      seq.push_back({scale(recent[k])});
    return unscale(stack_forward(seq, params_, stack_).readout.at(0));
  }

  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const LSTMStack& stack() const { return stack_; }
  const LSTMBaselineSpec& spec() const { return spec_; }
  std::vector<double> loss_history;

 private:
  LSTMBaselineSpec spec_;
  LSTMStack stack_;
  ParamSet params_;
  double min_ = 0.0;
  double max_ = 0.0;
};

// Trains on every look-back window of `node` in the training panel.
inline LSTMForecaster train_lstm_baseline(const TimeSeriesPanel& train, int node,
                                          const LSTMBaselineSpec& spec, const TrainConfig& cfg) {
  const auto& series = train.series(node);
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  LSTMForecaster f(spec, *lo, *hi, cfg.seed);
  if (series.size() <= spec.look_back)
    throw structural_error("training series too short for the LSTM baseline");
  const std::size_t L = spec.look_back;
  const std::size_t count = series.size() - L;
  if (cfg.epochs == 0) return f;

  const ParamSet& params = f.params();
  const LSTMStack& stack = f.stack();
  f.loss_history = fit_params(
      f.params(), count,
      [&](Tape& tape, std::span<const std::size_t> idx) {
        std::vector<Var> seq;
        for (std::size_t k = 0; k < L; ++k) {
          Tensor x = Tensor::matrix(idx.size(), 1);
          for (std::size_t r = 0; r < idx.size(); ++r) x[r] = f.scale(series[idx[r] + k]);
          seq.push_back(tape.constant(std::move(x)));
        }
        Tensor y = Tensor::matrix(idx.size(), 1);
        for (std::size_t r = 0; r < idx.size(); ++r) y[r] = f.scale(series[idx[r] + L]);
        return tape.sq_error_sum(run_stack(tape, params, stack, seq).readout, y);
      },
      cfg, PenaltyConfig{});
  return f;
}

}  // namespace gsrnn
