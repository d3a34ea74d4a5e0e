#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "clnet/tape.hpp"
#include "clnet/tensor.hpp"

namespace clnet {

struct Pad {
  int h = 0;
  int w = 0;
};

enum class Act { Relu, Sigmoid, HardSigmoid };
enum class PoolMode { Avg, Max };

namespace detail {

// ---------------------------------------------------------------------------
// Batched kernels. Activations carry a leading batch axis: feature maps are
// [B,C,H,W], vectors are [B,D]. Weights are unbatched. Every kernel runs a
// fixed summation order per output element, independent of B, so results are
// bit-identical whether samples are processed alone or in a batch.
// ---------------------------------------------------------------------------

template <typename S>
void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <typename S>
void check_conv_args(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* b) {
  require<S>(x.rank() == 4, "conv2d: input must be [B,C,H,W], got " + shape_str(x.shape()));
  require<S>(w.rank() == 4, "conv2d: kernels must be [Co,Ci,kh,kw], got " + shape_str(w.shape()));
  require<S>(x.extent(1) == w.extent(1),
             "conv2d: input channels " + shape_str(x.shape()) +
                 " do not match kernel channels " + shape_str(w.shape()));
  if (b != nullptr && !b->empty()) {
    require<S>(b->rank() == 1 && b->extent(0) == w.extent(0),
               "conv2d: bias shape " + shape_str(b->shape()) + " must be [Co] for kernels " +
                   shape_str(w.shape()));
  }
}

// Zero-padded copy of one sample's feature map.
template <typename S>
void pad_sample(const S* x, S* xp, int C, int H, int W, int ph, int pw) {
  const int Hp = H + 2 * ph, Wp = W + 2 * pw;
  std::fill(xp, xp + static_cast<std::size_t>(C) * Hp * Wp, S(0));
  for (int c = 0; c < C; ++c) {
    for (int h = 0; h < H; ++h) {
      const S* src = x + (static_cast<std::size_t>(c) * H + h) * W;
      S* dst = xp + (static_cast<std::size_t>(c) * Hp + (h + ph)) * Wp + pw;
      for (int i = 0; i < W; ++i) dst[i] = src[i];
    }
  }
}

template <typename S>
Tensor<S> conv2d_batched(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* b, Pad pad) {
  check_conv_args(x, w, b);
  const int B = x.extent(0), Ci = x.extent(1), H = x.extent(2), W = x.extent(3);
  const int Co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const int Ho = H + 2 * pad.h - kh + 1, Wo = W + 2 * pad.w - kw + 1;
  require<S>(Ho >= 1 && Wo >= 1, "conv2d: kernel " + shape_str(w.shape()) +
                                     " does not fit input " + shape_str(x.shape()));
  const int Hp = H + 2 * pad.h, Wp = W + 2 * pad.w;
  const bool padded = pad.h > 0 || pad.w > 0;
  Tensor<S> y({B, Co, Ho, Wo});
  std::vector<S> scratch(padded ? static_cast<std::size_t>(Ci) * Hp * Wp : 0);
  const bool has_bias = b != nullptr && !b->empty();
  for (int bi = 0; bi < B; ++bi) {
    const S* xs = x.data() + static_cast<std::size_t>(bi) * Ci * H * W;
    if (padded) {
      pad_sample(xs, scratch.data(), Ci, H, W, pad.h, pad.w);
      xs = scratch.data();
    }
    for (int co = 0; co < Co; ++co) {
      S* yo = y.data() + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
      const S bv = has_bias ? (*b)[static_cast<std::size_t>(co)] : S(0);
      for (int i = 0; i < Ho * Wo; ++i) yo[i] = bv;
      for (int ci = 0; ci < Ci; ++ci) {
        const S* xc = xs + static_cast<std::size_t>(ci) * Hp * Wp;
        const S* wk = w.data() + (static_cast<std::size_t>(co) * Ci + ci) * kh * kw;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const S wv = wk[u * kw + v];
            for (int ho = 0; ho < Ho; ++ho) {
              const S* xr = xc + static_cast<std::size_t>(ho + u) * Wp + v;
              S* yr = yo + static_cast<std::size_t>(ho) * Wo;
              for (int wo = 0; wo < Wo; ++wo) yr[wo] += wv * xr[wo];
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename S>
void conv2d_dx_acc(Tensor<S>& gx, const Tensor<S>& gy, const Tensor<S>& w, Pad pad) {
  const int B = gx.extent(0), Ci = gx.extent(1), H = gx.extent(2), W = gx.extent(3);
  const int Co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const int Ho = gy.extent(2), Wo = gy.extent(3);
  const int Hp = H + 2 * pad.h, Wp = W + 2 * pad.w;
  std::vector<S> gxp(static_cast<std::size_t>(Ci) * Hp * Wp);
  for (int bi = 0; bi < B; ++bi) {
    std::fill(gxp.begin(), gxp.end(), S(0));
    for (int co = 0; co < Co; ++co) {
      const S* gyo = gy.data() + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
      for (int ci = 0; ci < Ci; ++ci) {
        S* gxc = gxp.data() + static_cast<std::size_t>(ci) * Hp * Wp;
        const S* wk = w.data() + (static_cast<std::size_t>(co) * Ci + ci) * kh * kw;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const S wv = wk[u * kw + v];
            for (int ho = 0; ho < Ho; ++ho) {
              S* gr = gxc + static_cast<std::size_t>(ho + u) * Wp + v;
              const S* gyr = gyo + static_cast<std::size_t>(ho) * Wo;
              for (int wo = 0; wo < Wo; ++wo) gr[wo] += wv * gyr[wo];
            }
          }
        }
      }
    }
    S* gxs = gx.data() + static_cast<std::size_t>(bi) * Ci * H * W;
    for (int ci = 0; ci < Ci; ++ci) {
      for (int h = 0; h < H; ++h) {
        const S* src = gxp.data() + (static_cast<std::size_t>(ci) * Hp + (h + pad.h)) * Wp + pad.w;
        S* dst = gxs + (static_cast<std::size_t>(ci) * H + h) * W;
        for (int i = 0; i < W; ++i) dst[i] += src[i];
      }
    }
  }
}

template <typename S>
void conv2d_dw_acc(Tensor<S>& gw, const Tensor<S>& gy, const Tensor<S>& x, Pad pad) {
  const int B = x.extent(0), Ci = x.extent(1), H = x.extent(2), W = x.extent(3);
  const int Co = gw.extent(0), kh = gw.extent(2), kw = gw.extent(3);
  const int Ho = gy.extent(2), Wo = gy.extent(3);
  const int Hp = H + 2 * pad.h, Wp = W + 2 * pad.w;
  const bool padded = pad.h > 0 || pad.w > 0;
  std::vector<S> scratch(padded ? static_cast<std::size_t>(Ci) * Hp * Wp : 0);
  std::vector<S> acc(static_cast<std::size_t>(Wo));
  for (int bi = 0; bi < B; ++bi) {
    const S* xs = x.data() + static_cast<std::size_t>(bi) * Ci * H * W;
    if (padded) {
      pad_sample(xs, scratch.data(), Ci, H, W, pad.h, pad.w);
      xs = scratch.data();
    }
    for (int co = 0; co < Co; ++co) {
      const S* gyo = gy.data() + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
      for (int ci = 0; ci < Ci; ++ci) {
        const S* xc = xs + static_cast<std::size_t>(ci) * Hp * Wp;
        S* gwk = gw.data() + (static_cast<std::size_t>(co) * Ci + ci) * kh * kw;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            std::fill(acc.begin(), acc.end(), S(0));
            for (int ho = 0; ho < Ho; ++ho) {
              const S* gyr = gyo + static_cast<std::size_t>(ho) * Wo;
              const S* xr = xc + static_cast<std::size_t>(ho + u) * Wp + v;
              for (int wo = 0; wo < Wo; ++wo) acc[wo] += gyr[wo] * xr[wo];
            }
            S s = S(0);
            for (int wo = 0; wo < Wo; ++wo) s += acc[wo];
            gwk[u * kw + v] += s;
          }
        }
      }
    }
  }
}

template <typename S>
void conv2d_db_acc(Tensor<S>& gb, const Tensor<S>& gy) {
  const int B = gy.extent(0), Co = gy.extent(1);
  const std::size_t hw = static_cast<std::size_t>(gy.extent(2)) * gy.extent(3);
  for (int bi = 0; bi < B; ++bi) {
    for (int co = 0; co < Co; ++co) {
      const S* gyr = gy.data() + (static_cast<std::size_t>(bi) * Co + co) * hw;
      S s = S(0);
      for (std::size_t i = 0; i < hw; ++i) s += gyr[i];
      gb[static_cast<std::size_t>(co)] += s;
    }
  }
}

template <typename S>
Tensor<S> dense_batched(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* b) {
  require<S>(x.rank() == 2, "dense: input must be [B,Din], got " + shape_str(x.shape()));
  require<S>(w.rank() == 2, "dense: weight must be [Dout,Din], got " + shape_str(w.shape()));
  require<S>(x.extent(1) == w.extent(1),
             "dense: input width " + shape_str(x.shape()) + " does not match weight " +
                 shape_str(w.shape()));
  const int B = x.extent(0), Di = x.extent(1), Do = w.extent(0);
  const bool has_bias = b != nullptr && !b->empty();
  if (has_bias) {
    require<S>(b->rank() == 1 && b->extent(0) == Do,
               "dense: bias shape " + shape_str(b->shape()) + " must be [Dout]");
  }
  // Weight transposed once (tiled, to keep the writes cache-friendly) so the
  // hot loop is a contiguous axpy over rows.
  std::vector<S> wt(static_cast<std::size_t>(Di) * Do);
  constexpr int kTile = 32;
  for (int o0 = 0; o0 < Do; o0 += kTile) {
    const int o1 = std::min(o0 + kTile, Do);
    for (int i0 = 0; i0 < Di; i0 += kTile) {
      const int i1 = std::min(i0 + kTile, Di);
      for (int i = i0; i < i1; ++i) {
        for (int o = o0; o < o1; ++o) {
          wt[static_cast<std::size_t>(i) * Do + o] = w[static_cast<std::size_t>(o) * Di + i];
        }
      }
    }
  }
  Tensor<S> y({B, Do});
  for (int bi = 0; bi < B; ++bi) {
    S* yr = y.data() + static_cast<std::size_t>(bi) * Do;
    for (int o = 0; o < Do; ++o) yr[o] = has_bias ? (*b)[static_cast<std::size_t>(o)] : S(0);
  }
  for (int i = 0; i < Di; ++i) {
    const S* wr = wt.data() + static_cast<std::size_t>(i) * Do;
    for (int bi = 0; bi < B; ++bi) {
      const S xv = x[static_cast<std::size_t>(bi) * Di + i];
      S* yr = y.data() + static_cast<std::size_t>(bi) * Do;
      for (int o = 0; o < Do; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

template <typename S>
void dense_dx_acc(Tensor<S>& gx, const Tensor<S>& gy, const Tensor<S>& w) {
  const int B = gx.extent(0), Di = gx.extent(1), Do = w.extent(0);
  for (int o = 0; o < Do; ++o) {
    const S* wr = w.data() + static_cast<std::size_t>(o) * Di;
    for (int bi = 0; bi < B; ++bi) {
      const S g = gy[static_cast<std::size_t>(bi) * Do + o];
      S* gr = gx.data() + static_cast<std::size_t>(bi) * Di;
      for (int i = 0; i < Di; ++i) gr[i] += g * wr[i];
    }
  }
}

template <typename S>
void dense_dw_acc(Tensor<S>& gw, const Tensor<S>& gy, const Tensor<S>& x) {
  const int B = x.extent(0), Di = x.extent(1), Do = gw.extent(0);
  for (int o = 0; o < Do; ++o) {
    S* gwr = gw.data() + static_cast<std::size_t>(o) * Di;
    for (int bi = 0; bi < B; ++bi) {
      const S g = gy[static_cast<std::size_t>(bi) * Do + o];
      const S* xr = x.data() + static_cast<std::size_t>(bi) * Di;
      for (int i = 0; i < Di; ++i) gwr[i] += g * xr[i];
    }
  }
}

template <typename S>
void dense_db_acc(Tensor<S>& gb, const Tensor<S>& gy) {
  const int B = gy.extent(0), Do = gy.extent(1);
  for (int bi = 0; bi < B; ++bi) {
    const S* gyr = gy.data() + static_cast<std::size_t>(bi) * Do;
    for (int o = 0; o < Do; ++o) gb[static_cast<std::size_t>(o)] += gyr[o];
  }
}

template <typename S>
Tensor<S> global_avg_pool_batched(const Tensor<S>& x) {
  require<S>(x.rank() == 4, "global_avg_pool: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int B = x.extent(0), C = x.extent(1);
  const std::size_t hw = static_cast<std::size_t>(x.extent(2)) * x.extent(3);
  Tensor<S> z({B, C});
  for (int bi = 0; bi < B; ++bi) {
    for (int c = 0; c < C; ++c) {
      const S* xr = x.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(xr[i]);
      z[static_cast<std::size_t>(bi) * C + c] = static_cast<S>(acc / static_cast<double>(hw));
    }
  }
  return z;
}

template <typename S>
Tensor<S> channel_pool_batched(const Tensor<S>& x, PoolMode mode, std::vector<std::int32_t>* argmax) {
  require<S>(x.rank() == 4, "channel_pool: input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  Tensor<S> f({B, 1, H, W});
  if (mode == PoolMode::Avg) {
    const S inv = S(1) / static_cast<S>(C);
    for (int bi = 0; bi < B; ++bi) {
      S* fr = f.data() + static_cast<std::size_t>(bi) * hw;
      const S* xb = x.data() + static_cast<std::size_t>(bi) * C * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        S s = S(0);
        for (int c = 0; c < C; ++c) s += xb[static_cast<std::size_t>(c) * hw + p];
        fr[p] = s * inv;
      }
    }
  } else {
    if (argmax != nullptr) argmax->assign(static_cast<std::size_t>(B) * hw, 0);
    for (int bi = 0; bi < B; ++bi) {
      S* fr = f.data() + static_cast<std::size_t>(bi) * hw;
      const S* xb = x.data() + static_cast<std::size_t>(bi) * C * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        // Strict > scan from channel 0: ties resolve to the lowest index.
        S best = xb[p];
        std::int32_t arg = 0;
        for (int c = 1; c < C; ++c) {
          const S v = xb[static_cast<std::size_t>(c) * hw + p];
          if (v > best) {
            best = v;
            arg = c;
          }
        }
        fr[p] = best;
        if (argmax != nullptr) (*argmax)[static_cast<std::size_t>(bi) * hw + p] = arg;
      }
    }
  }
  return f;
}

template <typename S>
S activate_one(S x, Act kind) {
  switch (kind) {
    case Act::Relu:
      return x > S(0) ? x : S(0);
    case Act::Sigmoid:
      return S(1) / (S(1) + std::exp(-x));
    case Act::HardSigmoid: {
      S t = x + S(3);
      if (t < S(0)) t = S(0);
      if (t > S(6)) t = S(6);
      return t / S(6);
    }
  }
  return S(0);
}

template <typename S>
Tensor<S> activate_batched(const Tensor<S>& x, Act kind) {
  Tensor<S> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate_one(x[i], kind);
  return y;
}

// d/dx at the recorded input (for sigmoid, from the recorded output).
template <typename S>
void activate_dx_acc(Tensor<S>& gx, const Tensor<S>& gy, const Tensor<S>& x, const Tensor<S>& y,
                     Act kind) {
  const std::size_t n = x.size();
  switch (kind) {
    case Act::Relu:
      for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > S(0) ? gy[i] : S(0);
      break;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (S(1) - y[i]);
      break;
    case Act::HardSigmoid: {
      const S slope = S(1) / S(6);
      for (std::size_t i = 0; i < n; ++i)
        gx[i] += (x[i] > S(-3) && x[i] < S(3)) ? gy[i] * slope : S(0);
      break;
    }
  }
}

template <typename S>
Tensor<S> scale_channel_batched(const Tensor<S>& x, const Tensor<S>& s) {
  require<S>(x.rank() == 4 && s.rank() == 2 && s.extent(0) == x.extent(0) &&
                 s.extent(1) == x.extent(1),
             "scale: per-channel scale " + shape_str(s.shape()) + " incompatible with input " +
                 shape_str(x.shape()));
  const int B = x.extent(0), C = x.extent(1);
  const std::size_t hw = static_cast<std::size_t>(x.extent(2)) * x.extent(3);
  Tensor<S> y(x.shape());
  for (int bi = 0; bi < B; ++bi) {
    for (int c = 0; c < C; ++c) {
      const S sv = s[static_cast<std::size_t>(bi) * C + c];
      const S* xr = x.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
      S* yr = y.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) yr[i] = xr[i] * sv;
    }
  }
  return y;
}

template <typename S>
Tensor<S> scale_spatial_batched(const Tensor<S>& x, const Tensor<S>& s) {
  require<S>(x.rank() == 4 && s.rank() == 4 && s.extent(0) == x.extent(0) && s.extent(1) == 1 &&
                 s.extent(2) == x.extent(2) && s.extent(3) == x.extent(3),
             "scale: spatial mask " + shape_str(s.shape()) + " incompatible with input " +
                 shape_str(x.shape()));
  const int B = x.extent(0), C = x.extent(1);
  const std::size_t hw = static_cast<std::size_t>(x.extent(2)) * x.extent(3);
  Tensor<S> y(x.shape());
  for (int bi = 0; bi < B; ++bi) {
    const S* sr = s.data() + static_cast<std::size_t>(bi) * hw;
    for (int c = 0; c < C; ++c) {
      const S* xr = x.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
      S* yr = y.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) yr[i] = xr[i] * sr[i];
    }
  }
  return y;
}

template <typename S>
Tensor<S> add_tensors(const Tensor<S>& a, const Tensor<S>& b) {
  require<S>(a.same_shape(b),
             "add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  Tensor<S> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename S>
Tensor<S> concat_channels_batched(const Tensor<S>& a, const Tensor<S>& b) {
  require<S>(a.rank() == 4 && b.rank() == 4 && a.extent(0) == b.extent(0) &&
                 a.extent(2) == b.extent(2) && a.extent(3) == b.extent(3),
             "concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                 " differ outside the channel axis");
  const int B = a.extent(0), Ca = a.extent(1), Cb = b.extent(1);
  const std::size_t hw = static_cast<std::size_t>(a.extent(2)) * a.extent(3);
  Tensor<S> y({B, Ca + Cb, a.extent(2), a.extent(3)});
  for (int bi = 0; bi < B; ++bi) {
    S* yb = y.data() + static_cast<std::size_t>(bi) * (Ca + Cb) * hw;
    const S* ab = a.data() + static_cast<std::size_t>(bi) * Ca * hw;
    const S* bb = b.data() + static_cast<std::size_t>(bi) * Cb * hw;
    for (std::size_t i = 0; i < static_cast<std::size_t>(Ca) * hw; ++i) yb[i] = ab[i];
    for (std::size_t i = 0; i < static_cast<std::size_t>(Cb) * hw; ++i)
      yb[static_cast<std::size_t>(Ca) * hw + i] = bb[i];
  }
  return y;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-sample operations (the library's public math surface).
// ---------------------------------------------------------------------------

/// Cross-correlation with bias, stride 1. Kernel extents must be odd; the
/// caller picks the padding pair (in-model convolutions use "same" padding).
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, Pad pad) {
  detail::require<S>(x.rank() == 3, "conv2d: input must be [C,H,W], got " + shape_str(x.shape()));
  detail::require<S>(w.rank() == 4 && w.extent(2) % 2 == 1 && w.extent(3) % 2 == 1,
                     "conv2d: kernel extents must be odd, got " + shape_str(w.shape()));
  auto xb = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
  auto y = detail::conv2d_batched(xb, w, &b, pad);
  return std::move(y).reshaped({y.extent(1), y.extent(2), y.extent(3)});
}

/// 1x1 convolution: a per-location mix of channels, strictly location-local.
template <typename S>
Tensor<S> pointwise_conv(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  detail::require<S>(w.rank() == 4 && w.extent(2) == 1 && w.extent(3) == 1,
                     "pointwise_conv: kernel spatial extent must be 1x1, got " +
                         shape_str(w.shape()));
  return conv2d(x, w, b, Pad{0, 0});
}

template <typename S>
Tensor<S> fully_connected(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  detail::require<S>(x.rank() == 1, "fully_connected: input must be [Din], got " + shape_str(x.shape()));
  auto y = detail::dense_batched(x.reshaped({1, x.extent(0)}), w, &b);
  return std::move(y).reshaped({y.extent(1)});
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  detail::require<S>(x.rank() == 3, "global_avg_pool: input must be [C,H,W], got " + shape_str(x.shape()));
  auto z = detail::global_avg_pool_batched(x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)}));
  return std::move(z).reshaped({z.extent(1)});
}

template <typename S>
Tensor<S> channel_pool(const Tensor<S>& x, PoolMode mode) {
  detail::require<S>(x.rank() == 3, "channel_pool: input must be [C,H,W], got " + shape_str(x.shape()));
  auto f = detail::channel_pool_batched(x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)}),
                                        mode, nullptr);
  return std::move(f).reshaped({1, f.extent(2), f.extent(3)});
}

template <typename S>
Tensor<S> activations(const Tensor<S>& x, Act kind) {
  return detail::activate_batched(x, kind);
}

template <typename S>
S hard_sigmoid(S x) {
  return detail::activate_one(x, Act::HardSigmoid);
}

template <typename S>
S sigmoid(S x) {
  return detail::activate_one(x, Act::Sigmoid);
}

/// Broadcast multiply: scale is either per-channel [C] or per-location
/// [1,H,W]. No other broadcast form is accepted.
template <typename S>
Tensor<S> elementwise_scale_broadcast(const Tensor<S>& x, const Tensor<S>& scale) {
  detail::require<S>(x.rank() == 3, "scale: input must be [C,H,W], got " + shape_str(x.shape()));
  auto xb = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
  if (scale.rank() == 1 && scale.extent(0) == x.extent(0)) {
    auto y = detail::scale_channel_batched(xb, scale.reshaped({1, scale.extent(0)}));
    return std::move(y).reshaped(x.shape());
  }
  if (scale.rank() == 3 && scale.extent(0) == 1 && scale.extent(1) == x.extent(1) &&
      scale.extent(2) == x.extent(2)) {
    auto y = detail::scale_spatial_batched(
        xb, scale.reshaped({1, 1, scale.extent(1), scale.extent(2)}));
    return std::move(y).reshaped(x.shape());
  }
  throw ShapeError("scale: shape " + shape_str(scale.shape()) + " is neither [C] nor [1,H,W] for input " +
                   shape_str(x.shape()));
}

/// Mean over every element of the squared difference. Accumulated in double
/// so the value is stable for large batches.
template <typename S>
S mse_loss(const Tensor<S>& truth, const Tensor<S>& pred) {
  detail::require<S>(truth.same_shape(pred), "mse_loss: shapes " + shape_str(truth.shape()) +
                                                 " and " + shape_str(pred.shape()) + " differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const S d = truth[i] - pred[i];
    acc += static_cast<double>(d) * static_cast<double>(d);
  }
  return static_cast<S>(acc / static_cast<double>(truth.size()));
}

// ---------------------------------------------------------------------------
// Taped (recorded) variants. These operate on batched shapes; pass
// Slot{-1} where an op's bias is absent.
// ---------------------------------------------------------------------------

template <typename S>
TapeSlot<S> conv2d(Tape<S>& t, TapeSlot<S> x, TapeSlot<S> w, TapeSlot<S> b, Pad pad) {
  const Tensor<S>* bias = b.id >= 0 ? &t.value(b) : nullptr;
  auto y = t.push(detail::conv2d_batched(t.value(x), t.value(w), bias, pad));
  t.node([x, w, b, y, pad](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    detail::conv2d_dx_acc(tt.grad(x), gy, tt.value(w), pad);
    detail::conv2d_dw_acc(tt.grad(w), gy, tt.value(x), pad);
    if (b.id >= 0) detail::conv2d_db_acc(tt.grad(b), gy);
  });
  return y;
}

template <typename S>
TapeSlot<S> dense(Tape<S>& t, TapeSlot<S> x, TapeSlot<S> w, TapeSlot<S> b) {
  const Tensor<S>* bias = b.id >= 0 ? &t.value(b) : nullptr;
  auto y = t.push(detail::dense_batched(t.value(x), t.value(w), bias));
  t.node([x, w, b, y](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    detail::dense_dx_acc(tt.grad(x), gy, tt.value(w));
    detail::dense_dw_acc(tt.grad(w), gy, tt.value(x));
    if (b.id >= 0) detail::dense_db_acc(tt.grad(b), gy);
  });
  return y;
}

template <typename S>
TapeSlot<S> global_avg_pool(Tape<S>& t, TapeSlot<S> x) {
  auto z = t.push(detail::global_avg_pool_batched(t.value(x)));
  t.node([x, z](Tape<S>& tt) {
    Tensor<S>& gx = tt.grad(x);
    const Tensor<S>& gz = tt.grad(z);
    const int B = gx.extent(0), C = gx.extent(1);
    const std::size_t hw = static_cast<std::size_t>(gx.extent(2)) * gx.extent(3);
    const S inv = S(1) / static_cast<S>(hw);
    for (int bi = 0; bi < B; ++bi) {
      for (int c = 0; c < C; ++c) {
        const S g = gz[static_cast<std::size_t>(bi) * C + c] * inv;
        S* gr = gx.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) gr[i] += g;
      }
    }
  });
  return z;
}

template <typename S>
TapeSlot<S> channel_pool(Tape<S>& t, TapeSlot<S> x, PoolMode mode) {
  std::vector<std::int32_t> argmax;
  auto f = t.push(detail::channel_pool_batched(t.value(x), mode,
                                               mode == PoolMode::Max ? &argmax : nullptr));
  if (mode == PoolMode::Avg) {
    t.node([x, f](Tape<S>& tt) {
      Tensor<S>& gx = tt.grad(x);
      const Tensor<S>& gf = tt.grad(f);
      const int B = gx.extent(0), C = gx.extent(1);
      const std::size_t hw = static_cast<std::size_t>(gx.extent(2)) * gx.extent(3);
      const S inv = S(1) / static_cast<S>(C);
      for (int bi = 0; bi < B; ++bi) {
        const S* gfr = gf.data() + static_cast<std::size_t>(bi) * hw;
        for (int c = 0; c < C; ++c) {
          S* gr = gx.data() + (static_cast<std::size_t>(bi) * C + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) gr[i] += gfr[i] * inv;
        }
      }
    });
  } else {
    t.node([x, f, argmax = std::move(argmax)](Tape<S>& tt) {
      Tensor<S>& gx = tt.grad(x);
      const Tensor<S>& gf = tt.grad(f);
      const int B = gx.extent(0), C = gx.extent(1);
      const std::size_t hw = static_cast<std::size_t>(gx.extent(2)) * gx.extent(3);
      for (int bi = 0; bi < B; ++bi) {
        const S* gfr = gf.data() + static_cast<std::size_t>(bi) * hw;
        S* gb = gx.data() + static_cast<std::size_t>(bi) * C * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          const std::int32_t c = argmax[static_cast<std::size_t>(bi) * hw + p];
          gb[static_cast<std::size_t>(c) * hw + p] += gfr[p];
        }
      }
    });
  }
  return f;
}

template <typename S>
TapeSlot<S> activations(Tape<S>& t, TapeSlot<S> x, Act kind) {
  auto y = t.push(detail::activate_batched(t.value(x), kind));
  t.node([x, y, kind](Tape<S>& tt) {
    detail::activate_dx_acc(tt.grad(x), tt.grad(y), tt.value(x), tt.value(y), kind);
  });
  return y;
}

template <typename S>
TapeSlot<S> scale_channel(Tape<S>& t, TapeSlot<S> x, TapeSlot<S> s) {
  auto y = t.push(detail::scale_channel_batched(t.value(x), t.value(s)));
  t.node([x, s, y](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    const Tensor<S>& xv = tt.value(x);
    const Tensor<S>& sv = tt.value(s);
    Tensor<S>& gx = tt.grad(x);
    Tensor<S>& gs = tt.grad(s);
    const int B = xv.extent(0), C = xv.extent(1);
    const std::size_t hw = static_cast<std::size_t>(xv.extent(2)) * xv.extent(3);
    for (int bi = 0; bi < B; ++bi) {
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(bi) * C + c) * hw;
        const S scl = sv[static_cast<std::size_t>(bi) * C + c];
        S acc = S(0);
        for (std::size_t i = 0; i < hw; ++i) {
          gx[base + i] += gy[base + i] * scl;
          acc += gy[base + i] * xv[base + i];
        }
        gs[static_cast<std::size_t>(bi) * C + c] += acc;
      }
    }
  });
  return y;
}

template <typename S>
TapeSlot<S> scale_spatial(Tape<S>& t, TapeSlot<S> x, TapeSlot<S> s) {
  auto y = t.push(detail::scale_spatial_batched(t.value(x), t.value(s)));
  t.node([x, s, y](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    const Tensor<S>& xv = tt.value(x);
    const Tensor<S>& sv = tt.value(s);
    Tensor<S>& gx = tt.grad(x);
    Tensor<S>& gs = tt.grad(s);
    const int B = xv.extent(0), C = xv.extent(1);
    const std::size_t hw = static_cast<std::size_t>(xv.extent(2)) * xv.extent(3);
    for (int bi = 0; bi < B; ++bi) {
      const std::size_t sbase = static_cast<std::size_t>(bi) * hw;
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(bi) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          gx[base + i] += gy[base + i] * sv[sbase + i];
          gs[sbase + i] += gy[base + i] * xv[base + i];
        }
      }
    }
  });
  return y;
}

template <typename S>
TapeSlot<S> add(Tape<S>& t, TapeSlot<S> a, TapeSlot<S> b) {
  const Tensor<S>& av = t.value(a);
  const Tensor<S>& bv = t.value(b);
  detail::require<S>(av.same_shape(bv), "add: shapes " + shape_str(av.shape()) + " and " +
                                            shape_str(bv.shape()) + " differ");
  Tensor<S> y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
  auto ys = t.push(std::move(y));
  t.node([a, b, ys](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(ys);
    Tensor<S>& ga = tt.grad(a);
    Tensor<S>& gb = tt.grad(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  });
  return ys;
}

template <typename S>
TapeSlot<S> mul(Tape<S>& t, TapeSlot<S> a, TapeSlot<S> b) {
  const Tensor<S>& av = t.value(a);
  const Tensor<S>& bv = t.value(b);
  detail::require<S>(av.same_shape(bv), "mul: shapes " + shape_str(av.shape()) + " and " +
                                            shape_str(bv.shape()) + " differ");
  Tensor<S> y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * bv[i];
  auto ys = t.push(std::move(y));
  t.node([a, b, ys](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(ys);
    const Tensor<S>& av2 = tt.value(a);
    const Tensor<S>& bv2 = tt.value(b);
    Tensor<S>& ga = tt.grad(a);
    Tensor<S>& gb = tt.grad(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * bv2[i];
      gb[i] += gy[i] * av2[i];
    }
  });
  return ys;
}

template <typename S>
TapeSlot<S> concat_channels(Tape<S>& t, TapeSlot<S> a, TapeSlot<S> b) {
  auto y = t.push(detail::concat_channels_batched(t.value(a), t.value(b)));
  t.node([a, b, y](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    Tensor<S>& ga = tt.grad(a);
    Tensor<S>& gb = tt.grad(b);
    const int B = ga.extent(0), Ca = ga.extent(1), Cb = gb.extent(1);
    const std::size_t hw = static_cast<std::size_t>(ga.extent(2)) * ga.extent(3);
    for (int bi = 0; bi < B; ++bi) {
      const S* gyb = gy.data() + static_cast<std::size_t>(bi) * (Ca + Cb) * hw;
      S* gab = ga.data() + static_cast<std::size_t>(bi) * Ca * hw;
      S* gbb = gb.data() + static_cast<std::size_t>(bi) * Cb * hw;
      for (std::size_t i = 0; i < static_cast<std::size_t>(Ca) * hw; ++i) gab[i] += gyb[i];
      for (std::size_t i = 0; i < static_cast<std::size_t>(Cb) * hw; ++i)
        gbb[i] += gyb[static_cast<std::size_t>(Ca) * hw + i];
    }
  });
  return y;
}

template <typename S>
TapeSlot<S> reshape(Tape<S>& t, TapeSlot<S> x, std::vector<int> new_shape) {
  auto y = t.push(t.value(x).reshaped(std::move(new_shape)));
  t.node([x, y](Tape<S>& tt) {
    const Tensor<S>& gy = tt.grad(y);
    Tensor<S>& gx = tt.grad(x);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
  return y;
}

/// Recorded reconstruction loss against a constant target.
template <typename S>
TapeSlot<S> mse_against(Tape<S>& t, TapeSlot<S> pred, const Tensor<S>& target) {
  const S v = mse_loss(target, t.value(pred));
  auto l = t.push(Tensor<S>({1}, {v}));
  const Tensor<S>* tgt = &target;  // caller keeps target alive through backward
  t.node([pred, l, tgt](Tape<S>& tt) {
    const S seed = tt.grad(l)[0];
    const Tensor<S>& pv = tt.value(pred);
    Tensor<S>& gp = tt.grad(pred);
    const S k = seed * S(2) / static_cast<S>(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += k * (pv[i] - (*tgt)[i]);
  });
  return l;
}

}  // namespace clnet
