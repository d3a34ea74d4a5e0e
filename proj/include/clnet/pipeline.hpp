#pragma once

#include <string>
#include <vector>

#include "clnet/blocks.hpp"
#include "clnet/channel.hpp"
#include "clnet/ratio.hpp"
#include "clnet/tensor.hpp"

namespace clnet {

/// Compressed feedback payload produced by an encoder.
struct Codeword {
  std::vector<float> v;
  std::string model_id;
  EtaRatio eta;
};

/// Deterministic forward pass through the encoder. `ha` must already be
/// normalized with the dataset's stored offset/scale.
Codeword encode(const Tensor<float>& ha, const Model<float>& model);

/// Reconstruction in normalized space: shape [2,na,na], entries in [0,1].
Tensor<float> decode(const Codeword& cw, const Model<float>& model);

struct Nmse {
  double linear = 0.0;
  double db = 0.0;
};

/// Floor applied when reporting a perfect reconstruction in dB.
inline constexpr double kNmseDbFloor = -120.0;

/// Per-sample ratio ||truth - est||_F^2 / ||truth||_F^2 on de-normalized
/// (physical-scale) tensors. Rejects zero-energy ground truth.
Nmse nmse(const Tensor<float>& truth, const Tensor<float>& est);

/// Aggregate = arithmetic mean of per-sample linear ratios.
Nmse aggregate_nmse(const std::vector<double>& per_sample_linear);

struct EvalReport {
  std::vector<double> per_sample_linear;
  double linear = 0.0;
  double db = 0.0;
  int count = 0;
  EtaRatio eta;
  std::string scenario;
};

/// Runs the model over one split of a dataset (samples are normalized;
/// NMSE is computed after de-normalizing both sides). `batch` bounds forward
/// batch size.
EvalReport evaluate(const Model<float>& model, const Dataset& data, const std::string& split,
                    int batch = 64);

/// Validation-split NMSE in dB; the quantity logged each training epoch.
double validation_nmse_db(const Model<float>& model, const Dataset& data, int batch = 64);

std::string eval_report_text(const EvalReport& r);
std::string eval_report_csv(const EvalReport& r);

/// Codeword file: JSON header line (version, model id, eta, M, count),
/// float32 little-endian payload, trailing CRC32. `na` fixes the expected
/// length M; codewords of any other length are rejected.
void write_codewords(const std::string& path, const std::vector<Codeword>& cws, int na);
std::vector<Codeword> read_codewords(const std::string& path);

}  // namespace clnet
