#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "clnet/flops.hpp"
#include "clnet/ops.hpp"
#include "clnet/ratio.hpp"
#include "clnet/tape.hpp"

namespace clnet {

enum class Gate { Sigmoid, HardSigmoid };

inline Act gate_act(Gate g) { return g == Gate::Sigmoid ? Act::Sigmoid : Act::HardSigmoid; }

/// Memoizes tape leaves for parameter tensors so one tape sees each parameter
/// exactly once no matter how many ops consume it.
template <typename S>
class Binding {
 public:
  explicit Binding(Tape<S>& tape) : tape_(&tape) {}

  TapeSlot<S> of(const Tensor<S>& param) {
    auto it = slots_.find(&param);
    if (it == slots_.end()) it = slots_.emplace(&param, tape_->leaf(param)).first;
    return it->second;
  }

  /// Gradient of a bound parameter after backward(); zero tensor if the
  /// parameter never entered the graph.
  Tensor<S> grad_of(const Tensor<S>& param) {
    auto it = slots_.find(&param);
    if (it == slots_.end()) return Tensor<S>(param.shape());
    return tape_->grad(it->second);
  }

 private:
  Tape<S>* tape_;
  std::unordered_map<const Tensor<S>*, TapeSlot<S>> slots_;
};

namespace detail {

template <typename S>
Tensor<S> uniform_init(std::vector<int> shape, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<S> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(dist(rng));
  return t;
}

template <typename S>
Tensor<S> lift(const Tensor<S>& x) {
  std::vector<int> s{1};
  for (int e : x.shape()) s.push_back(e);
  return x.reshaped(s);
}

template <typename S>
Tensor<S> squeeze0(Tensor<S> x) {
  std::vector<int> s(x.shape().begin() + 1, x.shape().end());
  return std::move(x).reshaped(s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Blocks. Pure forwards come in per-sample ([C,H,W]) and batched ([B,C,H,W])
// forms that agree bit-for-bit; the taped forms record onto a Tape.
// ---------------------------------------------------------------------------

/// 1x1 convolution coupling the real and imaginary planes of each channel
/// coefficient without any spatial mixing.
template <typename S>
struct ForgedComplexInput {
  Tensor<S> w;  // [C,2,1,1]
  Tensor<S> b;  // [C]

  static ForgedComplexInput init(int c, std::mt19937_64& rng) {
    ForgedComplexInput f;
    f.w = detail::uniform_init<S>({c, 2, 1, 1}, 2.0, rng);
    f.b = Tensor<S>({c});
    return f;
  }

  Tensor<S> forward_batch(const Tensor<S>& ha) const {
    detail::require<S>(ha.rank() == 4 && ha.extent(1) == 2,
                       "forged input: expected 2 channels (real, imag), got " +
                           shape_str(ha.shape()));
    return detail::conv2d_batched(ha, w, &b, Pad{0, 0});
  }

  Tensor<S> forward(const Tensor<S>& ha) const {
    detail::require<S>(ha.rank() == 3 && ha.extent(0) == 2,
                       "forged input: expected 2 channels (real, imag), got " +
                           shape_str(ha.shape()));
    return detail::squeeze0(forward_batch(detail::lift(ha)));
  }

  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const {
    return conv2d(t, x, bind.of(w), bind.of(b), Pad{0, 0});
  }
};

/// Squeeze-and-excitation channel attention with reduction ratio 2 and no
/// biases in the excitation layers.
template <typename S>
struct SeBlock {
  Tensor<S> w1;  // [C/2, C]
  Tensor<S> w2;  // [C, C/2]
  Gate gate = Gate::HardSigmoid;

  static SeBlock init(int c, Gate gate, std::mt19937_64& rng) {
    SeBlock se;
    se.w1 = detail::uniform_init<S>({c / 2, c}, c, rng);
    se.w2 = detail::uniform_init<S>({c, c / 2}, c / 2.0, rng);
    se.gate = gate;
    return se;
  }

  Tensor<S> forward_batch(const Tensor<S>& x) const {
    detail::require<S>(x.rank() == 4 && x.extent(1) == w1.extent(1),
                       "se block: input " + shape_str(x.shape()) + " does not match W1 " +
                           shape_str(w1.shape()));
    const Tensor<S>* no_bias = nullptr;
    auto z = detail::global_avg_pool_batched(x);
    auto h = detail::activate_batched(detail::dense_batched(z, w1, no_bias), Act::Relu);
    auto s = detail::activate_batched(detail::dense_batched(h, w2, no_bias), gate_act(gate));
    return detail::scale_channel_batched(x, s);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    detail::require<S>(x.rank() == 3, "se block: input must be [C,H,W], got " + shape_str(x.shape()));
    return detail::squeeze0(forward_batch(detail::lift(x)));
  }

  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const {
    auto z = global_avg_pool(t, x);
    auto h = dense(t, z, bind.of(w1), TapeSlot<S>{-1});
    h = activations(t, h, Act::Relu);
    auto s = dense(t, h, bind.of(w2), TapeSlot<S>{-1});
    s = activations(t, s, gate_act(gate));
    return scale_channel(t, x, s);
  }
};

/// Spatial attention mask: channel-avg and channel-max maps, concatenated,
/// convolved k x k, gated, then multiplied back onto the input.
template <typename S>
struct SpatialAttention {
  Tensor<S> w;  // [1,2,k,k]
  Tensor<S> b;  // [1]
  Gate gate = Gate::HardSigmoid;

  static SpatialAttention init(int k, Gate gate, std::mt19937_64& rng) {
    SpatialAttention sa;
    sa.w = detail::uniform_init<S>({1, 2, k, k}, 2.0 * k * k, rng);
    sa.b = Tensor<S>({1});
    sa.gate = gate;
    return sa;
  }

  Tensor<S> forward_batch(const Tensor<S>& x) const {
    const int k = w.extent(2);
    auto favg = detail::channel_pool_batched(x, PoolMode::Avg, nullptr);
    auto fmax = detail::channel_pool_batched(x, PoolMode::Max, nullptr);
    auto dsc = detail::concat_channels_batched(favg, fmax);
    auto mask = detail::conv2d_batched(dsc, w, &b, Pad{k / 2, k / 2});
    mask = detail::activate_batched(mask, gate_act(gate));
    return detail::scale_spatial_batched(x, mask);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    detail::require<S>(x.rank() == 3, "spatial attention: input must be [C,H,W], got " +
                                          shape_str(x.shape()));
    return detail::squeeze0(forward_batch(detail::lift(x)));
  }

  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const {
    const int k = w.extent(2);
    auto favg = channel_pool(t, x, PoolMode::Avg);
    auto fmax = channel_pool(t, x, PoolMode::Max);
    auto dsc = concat_channels(t, favg, fmax);
    auto mask = conv2d(t, dsc, bind.of(w), bind.of(b), Pad{k / 2, k / 2});
    mask = activations(t, mask, gate_act(gate));
    return scale_spatial(t, x, mask);
  }
};

/// Dual-path residual refinement block: a 3x3 path and a 1xk -> kx1 path,
/// merged by a 1x1 convolution and added back onto the input. k = 3 for the
/// lite variant, k = 9 for the baseline.
template <typename S>
struct CrBlock {
  Tensor<S> a_w, a_b;    // [C,C,3,3], [C]
  Tensor<S> b1_w, b1_b;  // [C,C,1,k], [C]
  Tensor<S> b2_w, b2_b;  // [C,C,k,1], [C]
  Tensor<S> m_w, m_b;    // [C,2C,1,1], [C]
  int k = 3;

  static CrBlock init(int c, int k, std::mt19937_64& rng) {
    CrBlock cb;
    cb.a_w = detail::uniform_init<S>({c, c, 3, 3}, 9.0 * c, rng);
    cb.a_b = Tensor<S>({c});
    cb.b1_w = detail::uniform_init<S>({c, c, 1, k}, static_cast<double>(k) * c, rng);
    cb.b1_b = Tensor<S>({c});
    cb.b2_w = detail::uniform_init<S>({c, c, k, 1}, static_cast<double>(k) * c, rng);
    cb.b2_b = Tensor<S>({c});
    cb.m_w = detail::uniform_init<S>({c, 2 * c, 1, 1}, 2.0 * c, rng);
    cb.m_b = Tensor<S>({c});
    cb.k = k;
    return cb;
  }

  Tensor<S> forward_batch(const Tensor<S>& x) const {
    detail::require<S>(x.rank() == 4 && x.extent(1) == a_w.extent(1),
                       "crblock: input " + shape_str(x.shape()) + " does not match block width " +
                           shape_str(a_w.shape()));
    auto pa = detail::conv2d_batched(x, a_w, &a_b, Pad{1, 1});
    auto pb = detail::conv2d_batched(x, b1_w, &b1_b, Pad{0, k / 2});
    pb = detail::conv2d_batched(pb, b2_w, &b2_b, Pad{k / 2, 0});
    auto merged = detail::conv2d_batched(detail::concat_channels_batched(pa, pb), m_w, &m_b, Pad{0, 0});
    return detail::add_tensors(x, merged);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    detail::require<S>(x.rank() == 3, "crblock: input must be [C,H,W], got " + shape_str(x.shape()));
    return detail::squeeze0(forward_batch(detail::lift(x)));
  }

  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const {
    auto pa = conv2d(t, x, bind.of(a_w), bind.of(a_b), Pad{1, 1});
    auto pb = conv2d(t, x, bind.of(b1_w), bind.of(b1_b), Pad{0, k / 2});
    pb = conv2d(t, pb, bind.of(b2_w), bind.of(b2_b), Pad{k / 2, 0});
    auto merged = conv2d(t, concat_channels(t, pa, pb), bind.of(m_w), bind.of(m_b), Pad{0, 0});
    return add(t, x, merged);
  }

  void zero() {
    for (Tensor<S>* p : {&a_w, &a_b, &b1_w, &b1_b, &b2_w, &b2_b, &m_w, &m_b}) p->fill(S(0));
  }
};

// ---------------------------------------------------------------------------
// Assembled models.
// ---------------------------------------------------------------------------

struct ModelInfo {
  std::string arch = "clnet";  // clnet | crnet-base | clnet-noattn
  EtaRatio eta{1, 4};
  int na = 32;
  int c = 32;       // encoder width (clnet family)
  int cprime = 8;   // decoder refinement width
  std::uint64_t seed = 1;
  Gate gate = Gate::HardSigmoid;

  int codeword_length() const { return codeword_len(eta, na); }
};

template <typename S>
using ParamVisitor = std::function<void(const std::string&, Tensor<S>&)>;

/// Decoder shared by the whole model family: dense expansion, 5x5 head,
/// two refinement blocks, 1x1 projection, sigmoid output.
template <typename S>
struct Decoder {
  Tensor<S> fc_w, fc_b;      // [2Na^2, M], [2Na^2]
  Tensor<S> head_w, head_b;  // [C',2,5,5], [C']
  CrBlock<S> block1, block2;
  Tensor<S> out_w, out_b;  // [2,C',1,1], [2]
  int na = 32;

  static Decoder init(int na, int cprime, int m, int k, std::mt19937_64& rng) {
    Decoder d;
    const int n2 = 2 * na * na;
    d.fc_w = detail::uniform_init<S>({n2, m}, m, rng);
    d.fc_b = Tensor<S>({n2});
    d.head_w = detail::uniform_init<S>({cprime, 2, 5, 5}, 50.0, rng);
    d.head_b = Tensor<S>({cprime});
    d.block1 = CrBlock<S>::init(cprime, k, rng);
    d.block2 = CrBlock<S>::init(cprime, k, rng);
    d.out_w = detail::uniform_init<S>({2, cprime, 1, 1}, cprime, rng);
    d.out_b = Tensor<S>({2});
    d.na = na;
    return d;
  }

  Tensor<S> forward_batch(const Tensor<S>& v) const {
    detail::require<S>(v.rank() == 2 && v.extent(1) == fc_w.extent(1),
                       "decoder: codeword " + shape_str(v.shape()) + " does not match bottleneck " +
                           shape_str(fc_w.shape()));
    const int b = v.extent(0);
    auto h = detail::dense_batched(v, fc_w, &fc_b).reshaped({b, 2, na, na});
    h = detail::conv2d_batched(h, head_w, &head_b, Pad{2, 2});
    h = block1.forward_batch(h);
    h = block2.forward_batch(h);
    h = detail::conv2d_batched(h, out_w, &out_b, Pad{0, 0});
    return detail::activate_batched(h, Act::Sigmoid);
  }

  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> v) const {
    const int b = t.value(v).extent(0);
    auto h = dense(t, v, bind.of(fc_w), bind.of(fc_b));
    h = reshape(t, h, {b, 2, na, na});
    h = conv2d(t, h, bind.of(head_w), bind.of(head_b), Pad{2, 2});
    h = block1.forward(t, bind, h);
    h = block2.forward(t, bind, h);
    h = conv2d(t, h, bind.of(out_w), bind.of(out_b), Pad{0, 0});
    return activations(t, h, Act::Sigmoid);
  }

  void visit(const std::string& prefix, const ParamVisitor<S>& f) {
    f(prefix + ".fc.w", fc_w);
    f(prefix + ".fc.b", fc_b);
    f(prefix + ".head.w", head_w);
    f(prefix + ".head.b", head_b);
    for (auto [blk, name] : {std::pair{&block1, ".block1"}, std::pair{&block2, ".block2"}}) {
      f(prefix + name + ".a.w", blk->a_w);
      f(prefix + name + ".a.b", blk->a_b);
      f(prefix + name + ".b1.w", blk->b1_w);
      f(prefix + name + ".b1.b", blk->b1_b);
      f(prefix + name + ".b2.w", blk->b2_w);
      f(prefix + name + ".b2.b", blk->b2_b);
      f(prefix + name + ".m.w", blk->m_w);
      f(prefix + name + ".m.b", blk->m_b);
    }
    f(prefix + ".out.w", out_w);
    f(prefix + ".out.b", out_b);
  }

  void layers(const std::string& prefix, int m, std::vector<LayerDesc>& out) const {
    const int cp = head_w.extent(0);
    const int n2 = 2 * na * na;
    LayerDesc fc{.name = prefix + ".fc", .kind = LayerKind::Dense, .out_shape = {n2},
                 .din = m, .dout = n2, .bias = true};
    out.push_back(fc);
    out.push_back({.name = prefix + ".reshape", .kind = LayerKind::Reshape, .out_shape = {2, na, na}});
    out.push_back({.name = prefix + ".head", .kind = LayerKind::Conv, .out_shape = {cp, na, na},
                   .cin = 2, .cout = cp, .kh = 5, .kw = 5, .bias = true});
    for (const auto* bn : {".block1", ".block2"}) {
      const std::string p = prefix + bn;
      const int k = block1.k;
      out.push_back({.name = p + ".path_a", .kind = LayerKind::Conv, .out_shape = {cp, na, na},
                     .cin = cp, .cout = cp, .kh = 3, .kw = 3, .bias = true});
      out.push_back({.name = p + ".path_b1", .kind = LayerKind::Conv, .out_shape = {cp, na, na},
                     .cin = cp, .cout = cp, .kh = 1, .kw = k, .bias = true});
      out.push_back({.name = p + ".path_b2", .kind = LayerKind::Conv, .out_shape = {cp, na, na},
                     .cin = cp, .cout = cp, .kh = k, .kw = 1, .bias = true});
      out.push_back({.name = p + ".concat", .kind = LayerKind::Concat, .out_shape = {2 * cp, na, na}});
      out.push_back({.name = p + ".merge", .kind = LayerKind::Conv, .out_shape = {cp, na, na},
                     .cin = 2 * cp, .cout = cp, .kh = 1, .kw = 1, .bias = true});
      out.push_back({.name = p + ".residual", .kind = LayerKind::Add, .out_shape = {cp, na, na}});
    }
    out.push_back({.name = prefix + ".out", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = cp, .cout = 2, .kh = 1, .kw = 1, .bias = true});
    out.push_back({.name = prefix + ".sigmoid", .kind = LayerKind::Activation, .act = Act::Sigmoid,
                   .out_shape = {2, na, na}});
  }
};

/// Common surface of an assembled encoder/decoder pair.
template <typename S>
class Model {
 public:
  explicit Model(ModelInfo info) : info_(std::move(info)) {}
  virtual ~Model() = default;

  const ModelInfo& info() const { return info_; }

  virtual Tensor<S> encode_batch(const Tensor<S>& x) const = 0;
  virtual Tensor<S> decode_batch(const Tensor<S>& v) const = 0;
  Tensor<S> forward_batch(const Tensor<S>& x) const { return decode_batch(encode_batch(x)); }

  virtual TapeSlot<S> encode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const = 0;
  virtual TapeSlot<S> decode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> v) const = 0;
  TapeSlot<S> forward(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const {
    return decode(t, bind, encode(t, bind, x));
  }

  virtual void visit_params(const ParamVisitor<S>& f) = 0;
  virtual std::vector<LayerDesc> layers() const = 0;

  std::int64_t param_count() {
    std::int64_t n = 0;
    visit_params([&](const std::string&, Tensor<S>& p) { n += static_cast<std::int64_t>(p.size()); });
    return n;
  }

 private:
  ModelInfo info_;
};

/// CLNet: forged complex input, channel then spatial attention, 1x1
/// projection, dense bottleneck; lite decoder. With attention disabled the
/// input layer becomes a plain 3x3 convolution and both attention blocks are
/// dropped (the ablation variant).
template <typename S>
class ClnetModel final : public Model<S> {
 public:
  explicit ClnetModel(const ModelInfo& info) : Model<S>(info), attention_(info.arch != "clnet-noattn") {
    std::mt19937_64 rng(info.seed);
    const int c = info.c, na = info.na, m = info.codeword_length();
    if (attention_) {
      forged_ = ForgedComplexInput<S>::init(c, rng);
      se_ = SeBlock<S>::init(c, info.gate, rng);
      spatial_ = SpatialAttention<S>::init(7, info.gate, rng);
    } else {
      in_w_ = detail::uniform_init<S>({c, 2, 3, 3}, 18.0, rng);
      in_b_ = Tensor<S>({c});
    }
    proj_w_ = detail::uniform_init<S>({2, c, 1, 1}, c, rng);
    proj_b_ = Tensor<S>({2});
    fc_w_ = detail::uniform_init<S>({m, 2 * na * na}, 2.0 * na * na, rng);
    fc_b_ = Tensor<S>({m});
    dec_ = Decoder<S>::init(na, info.cprime, m, 3, rng);
  }

  Tensor<S> encode_batch(const Tensor<S>& x) const override {
    const int b = x.extent(0), na = this->info().na;
    Tensor<S> h = attention_ ? forged_.forward_batch(x)
                             : detail::conv2d_batched(x, in_w_, &in_b_, Pad{1, 1});
    if (attention_) {
      h = se_.forward_batch(h);
      h = spatial_.forward_batch(h);
    }
    h = detail::conv2d_batched(h, proj_w_, &proj_b_, Pad{0, 0});
    h = std::move(h).reshaped({b, 2 * na * na});
    return detail::dense_batched(h, fc_w_, &fc_b_);
  }

  Tensor<S> decode_batch(const Tensor<S>& v) const override { return dec_.forward_batch(v); }

  TapeSlot<S> encode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const override {
    const int b = t.value(x).extent(0), na = this->info().na;
    TapeSlot<S> h = attention_ ? forged_.forward(t, bind, x)
                               : conv2d(t, x, bind.of(in_w_), bind.of(in_b_), Pad{1, 1});
    if (attention_) {
      h = se_.forward(t, bind, h);
      h = spatial_.forward(t, bind, h);
    }
    h = conv2d(t, h, bind.of(proj_w_), bind.of(proj_b_), Pad{0, 0});
    h = reshape(t, h, {b, 2 * na * na});
    return dense(t, h, bind.of(fc_w_), bind.of(fc_b_));
  }

  TapeSlot<S> decode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> v) const override {
    return dec_.forward(t, bind, v);
  }

  void visit_params(const ParamVisitor<S>& f) override {
    if (attention_) {
      f("encoder.input.w", forged_.w);
      f("encoder.input.b", forged_.b);
      f("encoder.se.w1", se_.w1);
      f("encoder.se.w2", se_.w2);
      f("encoder.spatial.w", spatial_.w);
      f("encoder.spatial.b", spatial_.b);
    } else {
      f("encoder.input.w", in_w_);
      f("encoder.input.b", in_b_);
    }
    f("encoder.proj.w", proj_w_);
    f("encoder.proj.b", proj_b_);
    f("encoder.fc.w", fc_w_);
    f("encoder.fc.b", fc_b_);
    dec_.visit("decoder", f);
  }

  std::vector<LayerDesc> layers() const override {
    const ModelInfo& mi = this->info();
    const int c = mi.c, na = mi.na, m = mi.codeword_length();
    const std::int64_t chw = static_cast<std::int64_t>(c) * na * na;
    std::vector<LayerDesc> out;
    if (attention_) {
      out.push_back({.name = "encoder.input", .kind = LayerKind::Conv, .out_shape = {c, na, na},
                     .cin = 2, .cout = c, .kh = 1, .kw = 1, .bias = true});
      out.push_back({.name = "encoder.se.squeeze", .kind = LayerKind::GlobalAvgPool,
                     .out_shape = {c}, .in_elems = chw});
      out.push_back({.name = "encoder.se.fc1", .kind = LayerKind::Dense, .out_shape = {c / 2},
                     .din = c, .dout = c / 2, .bias = false});
      out.push_back({.name = "encoder.se.relu", .kind = LayerKind::Activation, .act = Act::Relu,
                     .out_shape = {c / 2}});
      out.push_back({.name = "encoder.se.fc2", .kind = LayerKind::Dense, .out_shape = {c},
                     .din = c / 2, .dout = c, .bias = false});
      out.push_back({.name = "encoder.se.gate", .kind = LayerKind::Activation,
                     .act = gate_act(mi.gate), .out_shape = {c}});
      out.push_back({.name = "encoder.se.scale", .kind = LayerKind::Scale, .out_shape = {c, na, na}});
      out.push_back({.name = "encoder.spatial.avg", .kind = LayerKind::ChannelAvgPool,
                     .out_shape = {1, na, na}, .in_elems = chw});
      out.push_back({.name = "encoder.spatial.max", .kind = LayerKind::ChannelMaxPool,
                     .out_shape = {1, na, na}, .in_elems = chw});
      out.push_back({.name = "encoder.spatial.concat", .kind = LayerKind::Concat,
                     .out_shape = {2, na, na}});
      out.push_back({.name = "encoder.spatial.conv", .kind = LayerKind::Conv,
                     .out_shape = {1, na, na}, .cin = 2, .cout = 1, .kh = 7, .kw = 7, .bias = true});
      out.push_back({.name = "encoder.spatial.gate", .kind = LayerKind::Activation,
                     .act = gate_act(mi.gate), .out_shape = {1, na, na}});
      out.push_back({.name = "encoder.spatial.scale", .kind = LayerKind::Scale,
                     .out_shape = {c, na, na}});
    } else {
      out.push_back({.name = "encoder.input", .kind = LayerKind::Conv, .out_shape = {c, na, na},
                     .cin = 2, .cout = c, .kh = 3, .kw = 3, .bias = true});
    }
    out.push_back({.name = "encoder.proj", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = c, .cout = 2, .kh = 1, .kw = 1, .bias = true});
    out.push_back({.name = "encoder.flatten", .kind = LayerKind::Reshape, .out_shape = {2 * na * na}});
    out.push_back({.name = "encoder.fc", .kind = LayerKind::Dense, .out_shape = {m},
                   .din = 2 * na * na, .dout = m, .bias = true});
    dec_.layers("decoder", m, out);
    return out;
  }

 private:
  bool attention_;
  ForgedComplexInput<S> forged_;
  Tensor<S> in_w_, in_b_;  // ablation input conv
  SeBlock<S> se_;
  SpatialAttention<S> spatial_;
  Tensor<S> proj_w_, proj_b_;
  Tensor<S> fc_w_, fc_b_;
  Decoder<S> dec_;
};

/// Baseline of the CRNet family: dual-path encoder (3x3 alongside 1x9 -> 9x1),
/// no attention, and 1x9/9x1 refinement blocks in the decoder. Widths mirror
/// the lite model so the complexity comparison isolates the design changes.
template <typename S>
class CrnetModel final : public Model<S> {
 public:
  explicit CrnetModel(const ModelInfo& info) : Model<S>(info) {
    std::mt19937_64 rng(info.seed);
    const int na = info.na, m = info.codeword_length();
    a_w_ = detail::uniform_init<S>({2, 2, 3, 3}, 18.0, rng);
    a_b_ = Tensor<S>({2});
    b1_w_ = detail::uniform_init<S>({2, 2, 1, 9}, 18.0, rng);
    b1_b_ = Tensor<S>({2});
    b2_w_ = detail::uniform_init<S>({2, 2, 9, 1}, 18.0, rng);
    b2_b_ = Tensor<S>({2});
    merge_w_ = detail::uniform_init<S>({2, 4, 1, 1}, 4.0, rng);
    merge_b_ = Tensor<S>({2});
    fc_w_ = detail::uniform_init<S>({m, 2 * na * na}, 2.0 * na * na, rng);
    fc_b_ = Tensor<S>({m});
    dec_ = Decoder<S>::init(na, info.cprime, m, 9, rng);
  }

  Tensor<S> encode_batch(const Tensor<S>& x) const override {
    const int b = x.extent(0), na = this->info().na;
    auto pa = detail::conv2d_batched(x, a_w_, &a_b_, Pad{1, 1});
    auto pb = detail::conv2d_batched(x, b1_w_, &b1_b_, Pad{0, 4});
    pb = detail::conv2d_batched(pb, b2_w_, &b2_b_, Pad{4, 0});
    auto h = detail::conv2d_batched(detail::concat_channels_batched(pa, pb), merge_w_, &merge_b_,
                                    Pad{0, 0});
    h = std::move(h).reshaped({b, 2 * na * na});
    return detail::dense_batched(h, fc_w_, &fc_b_);
  }

  Tensor<S> decode_batch(const Tensor<S>& v) const override { return dec_.forward_batch(v); }

  TapeSlot<S> encode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> x) const override {
    const int b = t.value(x).extent(0), na = this->info().na;
    auto pa = conv2d(t, x, bind.of(a_w_), bind.of(a_b_), Pad{1, 1});
    auto pb = conv2d(t, x, bind.of(b1_w_), bind.of(b1_b_), Pad{0, 4});
    pb = conv2d(t, pb, bind.of(b2_w_), bind.of(b2_b_), Pad{4, 0});
    auto h = conv2d(t, concat_channels(t, pa, pb), bind.of(merge_w_), bind.of(merge_b_), Pad{0, 0});
    h = reshape(t, h, {b, 2 * na * na});
    return dense(t, h, bind.of(fc_w_), bind.of(fc_b_));
  }

  TapeSlot<S> decode(Tape<S>& t, Binding<S>& bind, TapeSlot<S> v) const override {
    return dec_.forward(t, bind, v);
  }

  void visit_params(const ParamVisitor<S>& f) override {
    f("encoder.path_a.w", a_w_);
    f("encoder.path_a.b", a_b_);
    f("encoder.path_b1.w", b1_w_);
    f("encoder.path_b1.b", b1_b_);
    f("encoder.path_b2.w", b2_w_);
    f("encoder.path_b2.b", b2_b_);
    f("encoder.merge.w", merge_w_);
    f("encoder.merge.b", merge_b_);
    f("encoder.fc.w", fc_w_);
    f("encoder.fc.b", fc_b_);
    dec_.visit("decoder", f);
  }

  std::vector<LayerDesc> layers() const override {
    const ModelInfo& mi = this->info();
    const int na = mi.na, m = mi.codeword_length();
    std::vector<LayerDesc> out;
    out.push_back({.name = "encoder.path_a", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = 2, .cout = 2, .kh = 3, .kw = 3, .bias = true});
    out.push_back({.name = "encoder.path_b1", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = 2, .cout = 2, .kh = 1, .kw = 9, .bias = true});
    out.push_back({.name = "encoder.path_b2", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = 2, .cout = 2, .kh = 9, .kw = 1, .bias = true});
    out.push_back({.name = "encoder.concat", .kind = LayerKind::Concat, .out_shape = {4, na, na}});
    out.push_back({.name = "encoder.merge", .kind = LayerKind::Conv, .out_shape = {2, na, na},
                   .cin = 4, .cout = 2, .kh = 1, .kw = 1, .bias = true});
    out.push_back({.name = "encoder.flatten", .kind = LayerKind::Reshape, .out_shape = {2 * na * na}});
    out.push_back({.name = "encoder.fc", .kind = LayerKind::Dense, .out_shape = {m},
                   .din = 2 * na * na, .dout = m, .bias = true});
    dec_.layers("decoder", m, out);
    return out;
  }

 private:
  Tensor<S> a_w_, a_b_, b1_w_, b1_b_, b2_w_, b2_b_, merge_w_, merge_b_;
  Tensor<S> fc_w_, fc_b_;
  Decoder<S> dec_;
};

/// Builds a model from its description. Throws std::invalid_argument for an
/// unsupported eta, width, or architecture name.
template <typename S>
std::unique_ptr<Model<S>> assemble(const ModelInfo& info) {
  if (!eta_supported(info.eta)) {
    throw std::invalid_argument("unsupported eta " + eta_str(info.eta));
  }
  if (info.na < 2 || info.codeword_length() < 1) {
    throw std::invalid_argument("grid size " + std::to_string(info.na) +
                                " leaves an empty codeword at eta " + eta_str(info.eta));
  }
  if (info.c < 2 || info.c % 2 != 0) {
    throw std::invalid_argument("encoder width must be even and >= 2, got " + std::to_string(info.c));
  }
  if (info.cprime < 1) {
    throw std::invalid_argument("decoder width must be >= 1, got " + std::to_string(info.cprime));
  }
  if (info.arch == "clnet" || info.arch == "clnet-noattn") {
    return std::make_unique<ClnetModel<S>>(info);
  }
  if (info.arch == "crnet-base") {
    return std::make_unique<CrnetModel<S>>(info);
  }
  throw std::invalid_argument("unknown architecture '" + info.arch + "'");
}

template <typename S>
std::unique_ptr<Model<S>> assemble_clnet(EtaRatio eta, int na = 32, int c = 32,
                                         Gate gate = Gate::HardSigmoid, std::uint64_t seed = 1) {
  ModelInfo info;
  info.arch = "clnet";
  info.eta = eta;
  info.na = na;
  info.c = c;
  info.gate = gate;
  info.seed = seed;
  return assemble<S>(info);
}

template <typename S>
std::unique_ptr<Model<S>> assemble_crnet_baseline(EtaRatio eta, int na = 32, std::uint64_t seed = 1) {
  ModelInfo info;
  info.arch = "crnet-base";
  info.eta = eta;
  info.na = na;
  info.c = 2;
  info.seed = seed;
  return assemble<S>(info);
}

}  // namespace clnet
