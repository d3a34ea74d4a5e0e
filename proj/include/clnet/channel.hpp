#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "clnet/tensor.hpp"

namespace clnet {

/// Downlink spatial-frequency channel matrix H, subcarriers x BS antennas.
struct SpatialFreqCSI {
  int nc = 0;
  int nt = 0;
  std::vector<std::complex<double>> h;  // row-major [nc][nt]

  std::complex<double>& at(int f, int t) { return h[static_cast<std::size_t>(f) * nt + t]; }
  const std::complex<double>& at(int f, int t) const {
    return h[static_cast<std::size_t>(f) * nt + t];
  }
};

struct ClusterSpec {
  double aoa_mean = 0.0;      // radians
  double aoa_spread = 0.05;   // radians, std dev of sub-path angles
  double delay_mean = 4.0;    // delay-tap units, < na
  double delay_spread = 0.8;  // tap units, std dev of sub-path delays
  double gain = 1.0;          // complex gain scale
};

/// Clustered multipath channel description. Deterministic in `seed`.
struct MultipathSpec {
  int nc = 256;
  int nt = 32;
  int na = 32;
  int subpaths = 8;  // sub-paths drawn around each cluster mean
  std::vector<ClusterSpec> clusters;
  std::uint64_t seed = 1;

  /// 3 clusters at short-to-mid delays; the stock configuration.
  static MultipathSpec defaults();
  /// Few clusters, short delays.
  static MultipathSpec indoor();
  /// More clusters, longer delays and spreads.
  static MultipathSpec outdoor();

  void validate() const;  // throws std::invalid_argument

  std::string to_json() const;
  static MultipathSpec from_json(const std::string& text);
};

/// Sum of steering-vector outer products with per-subcarrier delay phases;
/// pure function of the spec (bit-identical for equal seeds).
SpatialFreqCSI generate_channel(const MultipathSpec& spec);

/// 2D-DFT to the angular-delay domain with unitary normalization, so the
/// Frobenius norm is preserved and the transform inverts exactly.
SpatialFreqCSI to_angular_delay(const SpatialFreqCSI& h);
SpatialFreqCSI from_angular_delay(const SpatialFreqCSI& hp);

/// Rows [row_begin, row_end) of the angular-delay transform; row k of the
/// result equals row k of to_angular_delay(h) bit-for-bit.
SpatialFreqCSI angular_delay_rows(const SpatialFreqCSI& h, int row_begin, int row_end);

/// Keeps the first `na` delay rows and stacks real/imaginary parts into
/// planes 0 and 1 of a [2,na,na] tensor. No normalization is applied here.
Tensor<double> truncate_and_split(const SpatialFreqCSI& hp, int na);

/// Fraction of squared Frobenius energy inside the first `na` delay rows.
double kept_energy_fraction(const SpatialFreqCSI& h, int na);

struct NormMeta {
  double offset = 0.0;
  double scale = 1.0;
};

/// Dataset-global affine map x -> (x - offset)/scale with offset = min and
/// scale = max - min; maps every entry into [0,1]. Rejects a degenerate
/// (constant) dataset.
NormMeta normalize_dataset(std::vector<Tensor<double>>& samples);

inline double denormalize_value(double x, const NormMeta& m) { return x * m.scale + m.offset; }

struct DatasetHeader {
  int version = 1;
  int nc = 0, nt = 0, na = 0;
  int count = 0;
  int n_train = 0, n_val = 0, n_test = 0;
  NormMeta norm;
  MultipathSpec spec;
  std::uint64_t seed = 0;
  std::string scenario;  // preset label or "custom"
};

/// Normalized samples plus everything needed to reproduce and de-normalize
/// them. Samples are stored float32; indices [0,n_train) are the training
/// split, then validation, then test.
struct Dataset {
  DatasetHeader hdr;
  std::vector<Tensor<float>> samples;  // each [2,na,na], in [0,1]

  const Tensor<float>& train(int i) const { return samples[static_cast<std::size_t>(i)]; }
  const Tensor<float>& val(int i) const {
    return samples[static_cast<std::size_t>(hdr.n_train + i)];
  }
  const Tensor<float>& test(int i) const {
    return samples[static_cast<std::size_t>(hdr.n_train + hdr.n_val + i)];
  }
};

/// Split counts in the 10:3:2 ratio. Throws std::invalid_argument when any
/// split would be empty.
void split_counts(int total, int& n_train, int& n_val, int& n_test);

struct DatasetStats {
  double mean_kept_energy = 0.0;  // fraction of energy in the kept rows
  double mean_top10_share = 0.0;  // energy share of the largest 10% entries
};

/// Generates `count` samples (per-sample seeds derived from spec.seed),
/// normalizes globally, and assigns splits. `stats`, when non-null, receives
/// per-dataset energy statistics.
Dataset generate_dataset(const MultipathSpec& spec, int count, const std::string& scenario,
                         DatasetStats* stats = nullptr);

/// Share of total squared energy held by the largest 10% |entries| of a
/// [2,na,na] sample.
double top10_energy_share(const Tensor<double>& sample);

/// Dataset file: one JSON header line, float32 little-endian payload
/// (samples concatenated as 2 x na x na blocks, C order), trailing CRC32 of
/// the payload.
void write_dataset(const std::string& path, const Dataset& d);
Dataset read_dataset(const std::string& path);

}  // namespace clnet
