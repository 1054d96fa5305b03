#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsrnn/errors.hpp"
#include "gsrnn/tensor.hpp"

namespace gsrnn {

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` maps a ParamSet to a scalar; `analytic` holds its gradient at `params`.
template <class Fn>
double grad_check(Fn&& f, const ParamSet& params, const ParamSet& analytic, double h) {
  if (!(h > 0.0)) throw structural_error("grad_check: step h must be positive");
  params.require_same_structure(analytic, "grad_check analytic gradient");
  ParamSet probe = params;
  double worst = 0.0;
  for (const auto& [name, entry] : params) {
    Tensor& t = probe[name];
    const Tensor& g = analytic[name];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x0 = t[i];
      t[i] = x0 + h;
      const double fp = f(static_cast<const ParamSet&>(probe));
      t[i] = x0 - h;
      const double fm = f(static_cast<const ParamSet&>(probe));
      t[i] = x0;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw numeric_error("grad_check: non-finite function value at '" + name + "'[" +
                            std::to_string(i) + "]");
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(g[i] - numeric) / std::max(1.0, std::abs(g[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Largest singular value, as the square root of the top eigenvalue of A^T A
// found by cyclic Jacobi rotations.
inline double spectral_norm(const Tensor& a) {
  if (a.rank() != 2) throw structural_error("spectral_norm expects a rank-2 tensor");
  if (a.empty()) throw structural_error("spectral_norm of an empty tensor");
  const std::size_t rows = a.rows();
  const std::size_t n = a.cols();
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += a.at(r, i) * a.at(r, j);
      s[i * n + j] = acc;
    }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return s[i * n + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += at(i, i) * at(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    }
    if (off <= 1e-32 * diag || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - sn * akq;
          at(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - sn * aqk;
          at(q, k) = sn * apk + c * aqk;
        }
      }
  }
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, at(i, i));
  return std::sqrt(std::max(top, 0.0));
}

}  // namespace gsrnn
