#include "clnet/flops.hpp"

#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace clnet {

std::string layer_kind_str(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::ChannelAvgPool: return "channel_avg_pool";
    case LayerKind::ChannelMaxPool: return "channel_max_pool";
    case LayerKind::Activation: return "activation";
    case LayerKind::Scale: return "scale";
    case LayerKind::Add: return "add";
    case LayerKind::Concat: return "concat";
    case LayerKind::Reshape: return "reshape";
  }
  return "?";
}

namespace {

std::string act_suffix(Act a) {
  switch (a) {
    case Act::Relu: return "relu";
    case Act::Sigmoid: return "sigmoid";
    case Act::HardSigmoid: return "hard_sigmoid";
  }
  return "?";
}

std::int64_t shape_elems(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

}  // namespace

FlopRow count_layer(const LayerDesc& desc) {
  FlopRow row;
  row.name = desc.name;
  row.kind = layer_kind_str(desc.kind);
  if (desc.kind == LayerKind::Activation) row.kind += ":" + act_suffix(desc.act);
  row.out_shape = shape_str(desc.out_shape);
  if (desc.out_shape.empty()) throw std::invalid_argument("layer '" + desc.name + "' has no output shape");
  const std::int64_t n = shape_elems(desc.out_shape);

  switch (desc.kind) {
    case LayerKind::Conv: {
      if (desc.cin <= 0 || desc.cout <= 0 || desc.kh <= 0 || desc.kw <= 0 ||
          desc.out_shape.size() != 3) {
        throw std::invalid_argument("conv layer '" + desc.name + "' is not fully shaped");
      }
      const std::int64_t hw =
          static_cast<std::int64_t>(desc.out_shape[1]) * desc.out_shape[2];
      row.macs = static_cast<std::int64_t>(desc.cout) * desc.cin * desc.kh * desc.kw * hw;
      row.flops = 2 * row.macs;
      row.params = static_cast<std::int64_t>(desc.cout) * desc.cin * desc.kh * desc.kw +
                   (desc.bias ? desc.cout : 0);
      break;
    }
    case LayerKind::Dense: {
      if (desc.din <= 0 || desc.dout <= 0) {
        throw std::invalid_argument("dense layer '" + desc.name + "' is not fully shaped");
      }
      row.macs = static_cast<std::int64_t>(desc.din) * desc.dout;
      row.flops = 2 * row.macs;
      row.params = static_cast<std::int64_t>(desc.din) * desc.dout + (desc.bias ? desc.dout : 0);
      break;
    }
    case LayerKind::GlobalAvgPool:
    case LayerKind::ChannelAvgPool:
    case LayerKind::ChannelMaxPool:
      if (desc.in_elems <= 0) {
        throw std::invalid_argument("pool layer '" + desc.name + "' has no input element count");
      }
      row.flops = desc.in_elems;  // 1 flop per element read
      break;
    case LayerKind::Activation:
      switch (desc.act) {
        case Act::Relu: row.flops = n; break;
        case Act::HardSigmoid: row.flops = 3 * n; break;  // add, two clamps
        case Act::Sigmoid:
          row.flops = 4 * n;  // negate, add, divide, plus the exponential below
          row.transcendentals = n;
          break;
      }
      break;
    case LayerKind::Scale:
    case LayerKind::Add:
      row.flops = n;
      break;
    case LayerKind::Concat:
    case LayerKind::Reshape:
      break;  // data movement only
  }
  return row;
}

FlopReport audit_layers(const std::string& model_id, EtaRatio eta,
                        const std::vector<LayerDesc>& layers) {
  FlopReport r;
  r.model_id = model_id;
  r.eta = eta;
  r.rows.reserve(layers.size());
  for (const auto& d : layers) {
    r.rows.push_back(count_layer(d));
    const auto& row = r.rows.back();
    r.total_macs += row.macs;
    r.total_flops += row.flops;
    r.total_params += row.params;
    r.total_transcendentals += row.transcendentals;
  }
  return r;
}

std::int64_t transcendental_census(const std::vector<LayerDesc>& layers) {
  std::int64_t n = 0;
  for (const auto& d : layers) n += count_layer(d).transcendentals;
  return n;
}

double flop_reduction(const FlopReport& a, const FlopReport& b) {
  if (!(a.eta == b.eta)) {
    throw std::invalid_argument("cannot compare reports at eta " + eta_str(a.eta) + " and " +
                                eta_str(b.eta));
  }
  if (b.total_flops == 0) throw std::invalid_argument("reference report has zero flops");
  return static_cast<double>(b.total_flops - a.total_flops) / static_cast<double>(b.total_flops);
}

std::string report_csv(const FlopReport& r) {
  std::string out = "layer,kind,out_shape,macs,flops,params,transcendentals\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%lld,%lld,%lld,%lld\n", row.name.c_str(),
                  row.kind.c_str(), row.out_shape.c_str(), static_cast<long long>(row.macs),
                  static_cast<long long>(row.flops), static_cast<long long>(row.params),
                  static_cast<long long>(row.transcendentals));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "TOTAL,,,%lld,%lld,%lld,%lld\n",
                static_cast<long long>(r.total_macs), static_cast<long long>(r.total_flops),
                static_cast<long long>(r.total_params),
                static_cast<long long>(r.total_transcendentals));
  out += buf;
  return out;
}

std::string report_summary(const FlopReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "model=%s\neta=%s\nlayers=%zu\nmacs=%lld\nflops=%lld\nparams=%lld\n"
                "transcendentals_per_forward=%lld\n",
                r.model_id.c_str(), eta_str(r.eta).c_str(), r.rows.size(),
                static_cast<long long>(r.total_macs), static_cast<long long>(r.total_flops),
                static_cast<long long>(r.total_params),
                static_cast<long long>(r.total_transcendentals));
  return buf;
}

}  // namespace clnet
