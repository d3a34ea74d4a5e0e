#pragma once

// Central finite-difference gradient harness, 64-bit mode only. The analytic
// side comes from a tape backward; the numeric side re-evaluates a pure
// forward closure with each parameter element nudged by +/- h.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "clnet/tensor.hpp"

namespace gradcheck {

// Relative error per the convention |analytic - fd| / (|fd| + 1e-8).
inline double max_rel_error(const std::vector<clnet::Tensor<double>*>& params,
                            const std::function<double()>& loss,
                            const std::vector<clnet::Tensor<double>>& analytic,
                            double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    clnet::Tensor<double>& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double x0 = p[i];
      p[i] = x0 + h;
      const double lp = loss();
      p[i] = x0 - h;
      const double lm = loss();
      p[i] = x0;
      const double fd = (lp - lm) / (2.0 * h);
      const double rel = std::abs(analytic[k][i] - fd) / (std::abs(fd) + 1e-8);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline clnet::Tensor<double> random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                                           double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  clnet::Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace gradcheck
