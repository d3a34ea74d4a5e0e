#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clnet/ops.hpp"
#include "clnet/ratio.hpp"

namespace clnet {

enum class LayerKind {
  Conv,
  Dense,
  GlobalAvgPool,
  ChannelAvgPool,
  ChannelMaxPool,
  Activation,
  Scale,
  Add,
  Concat,
  Reshape,
};

std::string layer_kind_str(LayerKind kind);

/// Purely shape-level description of one layer of an assembled graph; the
/// audit never looks at values.
struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::Reshape;
  Act act = Act::Relu;          // for Activation rows
  std::vector<int> out_shape;   // per-sample, no batch axis
  int cin = 0, cout = 0, kh = 0, kw = 0;  // Conv
  int din = 0, dout = 0;                  // Dense
  bool bias = true;
  std::int64_t in_elems = 0;  // pooling rows: elements read
};

struct FlopRow {
  std::string name;
  std::string kind;
  std::string out_shape;
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  std::int64_t transcendentals = 0;
};

struct FlopReport {
  std::string model_id;
  EtaRatio eta;
  std::vector<FlopRow> rows;
  std::int64_t total_macs = 0;
  std::int64_t total_flops = 0;
  std::int64_t total_params = 0;
  std::int64_t total_transcendentals = 0;
};

/// Counting convention: 1 MAC = 2 flops for conv/dense; pooling and
/// elementwise ops cost 1 flop per element; hard-sigmoid 3 per element;
/// sigmoid 4 per element plus one transcendental (the exponential) counted
/// separately.
FlopRow count_layer(const LayerDesc& desc);

FlopReport audit_layers(const std::string& model_id, EtaRatio eta,
                        const std::vector<LayerDesc>& layers);

/// Exponential evaluations required by one forward pass.
std::int64_t transcendental_census(const std::vector<LayerDesc>& layers);

/// Relative flop reduction of a against b: (flops_b - flops_a) / flops_b.
/// Both reports must describe the same eta.
double flop_reduction(const FlopReport& a, const FlopReport& b);

std::string report_csv(const FlopReport& r);
std::string report_summary(const FlopReport& r);

}  // namespace clnet
