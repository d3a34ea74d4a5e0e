#pragma once

// Naive reference implementations used as independent oracles. These stay
// deliberately separate from the library kernels: plain nested loops, no
// shared helpers, optional multiply counters for the complexity double-entry
// checks.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "clnet/tensor.hpp"

namespace oracle {

template <typename S>
clnet::Tensor<S> conv2d(const clnet::Tensor<S>& x, const clnet::Tensor<S>& w,
                        const clnet::Tensor<S>& b, int ph, int pw,
                        std::int64_t* mult_count = nullptr) {
  const int ci = x.extent(0), h = x.extent(1), wid = x.extent(2);
  const int co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const int ho = h + 2 * ph - kh + 1, wo = wid + 2 * pw - kw + 1;
  clnet::Tensor<S> y({co, ho, wo});
  std::int64_t mults = 0;
  for (int oc = 0; oc < co; ++oc) {
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) {
        double acc = b.empty() ? 0.0 : static_cast<double>(b[static_cast<std::size_t>(oc)]);
        for (int ic = 0; ic < ci; ++ic) {
          for (int u = 0; u < kh; ++u) {
            for (int v = 0; v < kw; ++v) {
              const int ii = i + u - ph;
              const int jj = j + v - pw;
              const double xv = (ii >= 0 && ii < h && jj >= 0 && jj < wid)
                                    ? static_cast<double>(x.at(ic, ii, jj))
                                    : 0.0;
              acc += static_cast<double>(w.at(oc, ic, u, v)) * xv;
              ++mults;
            }
          }
        }
        y.at(oc, i, j) = static_cast<S>(acc);
      }
    }
  }
  if (mult_count != nullptr) *mult_count = mults;
  return y;
}

template <typename S>
clnet::Tensor<S> matvec(const clnet::Tensor<S>& x, const clnet::Tensor<S>& w,
                        const clnet::Tensor<S>& b, std::int64_t* mult_count = nullptr) {
  const int di = x.extent(0), dout = w.extent(0);
  clnet::Tensor<S> y({dout});
  std::int64_t mults = 0;
  for (int o = 0; o < dout; ++o) {
    double acc = b.empty() ? 0.0 : static_cast<double>(b[static_cast<std::size_t>(o)]);
    for (int i = 0; i < di; ++i) {
      acc += static_cast<double>(w.at(o, i)) * static_cast<double>(x[static_cast<std::size_t>(i)]);
      ++mults;
    }
    y[static_cast<std::size_t>(o)] = static_cast<S>(acc);
  }
  if (mult_count != nullptr) *mult_count = mults;
  return y;
}

template <typename S>
clnet::Tensor<S> global_avg_pool(const clnet::Tensor<S>& x) {
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  clnet::Tensor<S> z({c});
  for (int ic = 0; ic < c; ++ic) {
    double acc = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) acc += static_cast<double>(x.at(ic, i, j));
    z[static_cast<std::size_t>(ic)] = static_cast<S>(acc / (static_cast<double>(h) * w));
  }
  return z;
}

template <typename S>
clnet::Tensor<S> channel_pool(const clnet::Tensor<S>& x, bool take_max) {
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  clnet::Tensor<S> f({1, h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (take_max) {
        S best = x.at(0, i, j);
        for (int ic = 1; ic < c; ++ic) best = std::max(best, x.at(ic, i, j));
        f.at(0, i, j) = best;
      } else {
        double acc = 0.0;
        for (int ic = 0; ic < c; ++ic) acc += static_cast<double>(x.at(ic, i, j));
        f.at(0, i, j) = static_cast<S>(acc / c);
      }
    }
  }
  return f;
}

template <typename S>
clnet::Tensor<S> scale_broadcast(const clnet::Tensor<S>& x, const clnet::Tensor<S>& s) {
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  clnet::Tensor<S> y({c, h, w});
  for (int ic = 0; ic < c; ++ic) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const S factor = s.rank() == 1 ? s[static_cast<std::size_t>(ic)] : s.at(0, i, j);
        y.at(ic, i, j) = x.at(ic, i, j) * factor;
      }
    }
  }
  return y;
}

template <typename S>
double mse(const clnet::Tensor<S>& a, const clnet::Tensor<S>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace oracle
