#include "clnet/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "clnet/io_util.hpp"

namespace clnet {

using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double frob_sq(const SpatialFreqCSI& m) {
  double e = 0.0;
  for (const auto& v : m.h) e += std::norm(v);
  return e;
}

}  // namespace

MultipathSpec MultipathSpec::defaults() {
  MultipathSpec s;
  s.clusters = {
      {-0.70, 0.05, 3.0, 0.6, 1.0},
      {0.20, 0.04, 8.0, 0.9, 0.8},
      {0.90, 0.06, 14.0, 1.2, 0.5},
  };
  return s;
}

MultipathSpec MultipathSpec::indoor() {
  MultipathSpec s;
  s.clusters = {
      {-0.50, 0.04, 2.0, 0.5, 1.0},
      {0.45, 0.05, 6.0, 0.8, 0.7},
  };
  return s;
}

MultipathSpec MultipathSpec::outdoor() {
  MultipathSpec s;
  s.clusters = {
      {-0.90, 0.06, 4.0, 1.0, 1.0},
      {-0.30, 0.05, 9.0, 1.4, 0.9},
      {0.30, 0.05, 13.0, 1.5, 0.7},
      {0.80, 0.07, 18.0, 1.8, 0.55},
      {1.10, 0.08, 22.0, 2.0, 0.4},
  };
  return s;
}

void MultipathSpec::validate() const {
  if (nc < 1 || nt < 1 || na < 1) throw std::invalid_argument("grid extents must be positive");
  if (na > nc) throw std::invalid_argument("na must not exceed nc");
  if (nt != na) throw std::invalid_argument("the square crop requires nt == na");
  if (subpaths < 1) throw std::invalid_argument("at least one sub-path per cluster");
  if (clusters.empty()) throw std::invalid_argument("at least one cluster");
  for (const auto& c : clusters) {
    if (c.delay_mean < 0.0 || c.delay_spread < 0.0) {
      throw std::invalid_argument("cluster delays must be non-negative");
    }
    if (c.delay_mean + 3.0 * c.delay_spread >= static_cast<double>(na)) {
      throw std::invalid_argument("cluster delay " + std::to_string(c.delay_mean) + " + 3*" +
                                  std::to_string(c.delay_spread) +
                                  " must stay below na = " + std::to_string(na));
    }
    if (c.gain <= 0.0) throw std::invalid_argument("cluster gain scale must be positive");
  }
}

std::string MultipathSpec::to_json() const {
  json j;
  j["nc"] = nc;
  j["nt"] = nt;
  j["na"] = na;
  j["subpaths"] = subpaths;
  j["seed"] = seed;
  json cl = json::array();
  for (const auto& c : clusters) {
    cl.push_back({{"aoa", c.aoa_mean},
                  {"aoa_spread", c.aoa_spread},
                  {"delay", c.delay_mean},
                  {"delay_spread", c.delay_spread},
                  {"gain", c.gain}});
  }
  j["clusters"] = cl;
  return j.dump();
}

MultipathSpec MultipathSpec::from_json(const std::string& text) {
  MultipathSpec s;
  json j = json::parse(text);
  s.nc = j.at("nc").get<int>();
  s.nt = j.at("nt").get<int>();
  s.na = j.at("na").get<int>();
  s.subpaths = j.at("subpaths").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.clusters.clear();
  for (const auto& c : j.at("clusters")) {
    s.clusters.push_back({c.at("aoa").get<double>(), c.at("aoa_spread").get<double>(),
                          c.at("delay").get<double>(), c.at("delay_spread").get<double>(),
                          c.at("gain").get<double>()});
  }
  return s;
}

SpatialFreqCSI generate_channel(const MultipathSpec& spec) {
  spec.validate();
  SpatialFreqCSI h;
  h.nc = spec.nc;
  h.nt = spec.nt;
  h.h.assign(static_cast<std::size_t>(spec.nc) * spec.nt, {0.0, 0.0});

  std::mt19937_64 rng(splitmix64(spec.seed));
  std::normal_distribution<double> randn(0.0, 1.0);
  const double sub_norm = 1.0 / std::sqrt(2.0 * spec.subpaths);

  std::vector<std::complex<double>> delay_phase(static_cast<std::size_t>(spec.nc));
  std::vector<std::complex<double>> steer(static_cast<std::size_t>(spec.nt));

  for (const auto& cl : spec.clusters) {
    for (int p = 0; p < spec.subpaths; ++p) {
      const double theta = cl.aoa_mean + cl.aoa_spread * randn(rng);
      const double delay = std::max(0.0, cl.delay_mean + cl.delay_spread * randn(rng));
      const std::complex<double> gain =
          cl.gain * sub_norm * std::complex<double>(randn(rng), randn(rng));

      // e^{+j 2 pi f d / Nc}: the forward DFT over subcarriers concentrates
      // this path at delay row round(d).
      for (int f = 0; f < spec.nc; ++f) {
        const double ph = kTwoPi * f * delay / spec.nc;
        delay_phase[static_cast<std::size_t>(f)] = {std::cos(ph), std::sin(ph)};
      }
      // Half-wavelength ULA steering across antennas.
      const double st = std::numbers::pi * std::sin(theta);
      for (int t = 0; t < spec.nt; ++t) {
        const double ph = st * t;
        steer[static_cast<std::size_t>(t)] = {std::cos(ph), std::sin(ph)};
      }
      for (int f = 0; f < spec.nc; ++f) {
        const std::complex<double> gf = gain * delay_phase[static_cast<std::size_t>(f)];
        auto* row = h.h.data() + static_cast<std::size_t>(f) * spec.nt;
        for (int t = 0; t < spec.nt; ++t) row[t] += gf * steer[static_cast<std::size_t>(t)];
      }
    }
  }
  return h;
}

SpatialFreqCSI angular_delay_rows(const SpatialFreqCSI& h, int row_begin, int row_end) {
  const int nc = h.nc, nt = h.nt;
  // Column transform first: G = H * Ft^H, Ft^H[t,a] = e^{+j 2 pi a t / nt}/sqrt(nt).
  std::vector<std::complex<double>> g(static_cast<std::size_t>(nc) * nt);
  std::vector<std::complex<double>> col_tw(static_cast<std::size_t>(nt) * nt);
  const double cinv = 1.0 / std::sqrt(static_cast<double>(nt));
  for (int t = 0; t < nt; ++t) {
    for (int a = 0; a < nt; ++a) {
      const double ph = kTwoPi * static_cast<double>(a) * t / nt;
      col_tw[static_cast<std::size_t>(t) * nt + a] = {cinv * std::cos(ph), cinv * std::sin(ph)};
    }
  }
  for (int f = 0; f < nc; ++f) {
    const auto* row = h.h.data() + static_cast<std::size_t>(f) * nt;
    auto* out = g.data() + static_cast<std::size_t>(f) * nt;
    for (int a = 0; a < nt; ++a) out[a] = {0.0, 0.0};
    for (int t = 0; t < nt; ++t) {
      const std::complex<double> hv = row[t];
      const auto* tw = col_tw.data() + static_cast<std::size_t>(t) * nt;
      for (int a = 0; a < nt; ++a) out[a] += hv * tw[a];
    }
  }
  // Row transform: out[k,:] = sum_f Fc[k,f] * g[f,:], Fc[k,f] = e^{-j 2 pi k f / nc}/sqrt(nc).
  SpatialFreqCSI res;
  res.nc = row_end - row_begin;
  res.nt = nt;
  res.h.assign(static_cast<std::size_t>(res.nc) * nt, {0.0, 0.0});
  const double rinv = 1.0 / std::sqrt(static_cast<double>(nc));
  for (int k = row_begin; k < row_end; ++k) {
    auto* out = res.h.data() + static_cast<std::size_t>(k - row_begin) * nt;
    for (int f = 0; f < nc; ++f) {
      const double ph = -kTwoPi * static_cast<double>(k) * f / nc;
      const std::complex<double> tw = {rinv * std::cos(ph), rinv * std::sin(ph)};
      const auto* grow = g.data() + static_cast<std::size_t>(f) * nt;
      for (int a = 0; a < nt; ++a) out[a] += tw * grow[a];
    }
  }
  return res;
}

SpatialFreqCSI to_angular_delay(const SpatialFreqCSI& h) { return angular_delay_rows(h, 0, h.nc); }

SpatialFreqCSI from_angular_delay(const SpatialFreqCSI& hp) {
  const int nc = hp.nc, nt = hp.nt;
  // Inverse row transform: g[f,:] = sum_k conj(Fc[k,f]) * hp[k,:].
  std::vector<std::complex<double>> g(static_cast<std::size_t>(nc) * nt);
  const double rinv = 1.0 / std::sqrt(static_cast<double>(nc));
  for (int f = 0; f < nc; ++f) {
    auto* out = g.data() + static_cast<std::size_t>(f) * nt;
    for (int a = 0; a < nt; ++a) out[a] = {0.0, 0.0};
    for (int k = 0; k < nc; ++k) {
      const double ph = kTwoPi * static_cast<double>(k) * f / nc;
      const std::complex<double> tw = {rinv * std::cos(ph), rinv * std::sin(ph)};
      const auto* row = hp.h.data() + static_cast<std::size_t>(k) * nt;
      for (int a = 0; a < nt; ++a) out[a] += tw * row[a];
    }
  }
  // Inverse column transform: h[f,t] = sum_a g[f,a] * conj(Ft^H[t,a]).
  SpatialFreqCSI res;
  res.nc = nc;
  res.nt = nt;
  res.h.assign(static_cast<std::size_t>(nc) * nt, {0.0, 0.0});
  const double cinv = 1.0 / std::sqrt(static_cast<double>(nt));
  for (int f = 0; f < nc; ++f) {
    const auto* grow = g.data() + static_cast<std::size_t>(f) * nt;
    auto* out = res.h.data() + static_cast<std::size_t>(f) * nt;
    for (int a = 0; a < nt; ++a) {
      for (int t = 0; t < nt; ++t) {
        const double ph = -kTwoPi * static_cast<double>(a) * t / nt;
        out[t] += grow[a] * std::complex<double>(cinv * std::cos(ph), cinv * std::sin(ph));
      }
    }
  }
  return res;
}

Tensor<double> truncate_and_split(const SpatialFreqCSI& hp, int na) {
  if (na > hp.nc) {
    throw std::invalid_argument("cannot keep " + std::to_string(na) + " rows of a " +
                                std::to_string(hp.nc) + "-row matrix");
  }
  if (hp.nt != na) {
    throw std::invalid_argument("square crop requires nt == na");
  }
  Tensor<double> out({2, na, na});
  for (int k = 0; k < na; ++k) {
    for (int a = 0; a < na; ++a) {
      const auto v = hp.h[static_cast<std::size_t>(k) * hp.nt + a];
      out.at(0, k, a) = v.real();
      out.at(1, k, a) = v.imag();
    }
  }
  return out;
}

double kept_energy_fraction(const SpatialFreqCSI& h, int na) {
  const double total = frob_sq(h);  // unitary transform preserves energy
  if (total <= 0.0) return 0.0;
  const SpatialFreqCSI kept = angular_delay_rows(h, 0, na);
  return frob_sq(kept) / total;
}

NormMeta normalize_dataset(std::vector<Tensor<double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("cannot normalize an empty dataset");
  double lo = samples[0][0], hi = samples[0][0];
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
  }
  if (!(hi > lo)) throw std::invalid_argument("degenerate dataset: max equals min");
  const NormMeta meta{lo, hi - lo};
  const double inv = 1.0 / meta.scale;
  for (auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (s[i] - meta.offset) * inv;
  }
  return meta;
}

void split_counts(int total, int& n_train, int& n_val, int& n_test) {
  n_train = total * 10 / 15;
  n_val = total * 3 / 15;
  n_test = total - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw std::invalid_argument(std::to_string(total) +
                                " samples cannot fill three non-empty 10:3:2 splits");
  }
}

double top10_energy_share(const Tensor<double>& sample) {
  std::vector<double> sq(sample.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    sq[i] = sample[i] * sample[i];
    total += sq[i];
  }
  if (total <= 0.0) return 0.0;
  std::sort(sq.begin(), sq.end(), std::greater<>());
  const std::size_t top = sample.size() / 10;
  double kept = 0.0;
  for (std::size_t i = 0; i < top; ++i) kept += sq[i];
  return kept / total;
}

Dataset generate_dataset(const MultipathSpec& spec, int count, const std::string& scenario,
                         DatasetStats* stats) {
  spec.validate();
  Dataset d;
  d.hdr.nc = spec.nc;
  d.hdr.nt = spec.nt;
  d.hdr.na = spec.na;
  d.hdr.count = count;
  d.hdr.spec = spec;
  d.hdr.seed = spec.seed;
  d.hdr.scenario = scenario;
  split_counts(count, d.hdr.n_train, d.hdr.n_val, d.hdr.n_test);

  std::vector<Tensor<double>> raw;
  raw.reserve(static_cast<std::size_t>(count));
  double kept_sum = 0.0, top10_sum = 0.0;
  for (int i = 0; i < count; ++i) {
    MultipathSpec per = spec;
    per.seed = splitmix64(spec.seed ^ (0x5eedULL + static_cast<std::uint64_t>(i)));
    const SpatialFreqCSI h = generate_channel(per);
    const SpatialFreqCSI ha = angular_delay_rows(h, 0, spec.na);
    raw.push_back(truncate_and_split(ha, spec.na));
    if (stats != nullptr) {
      const double total = frob_sq(h);
      kept_sum += total > 0.0 ? frob_sq(ha) / total : 0.0;
      top10_sum += top10_energy_share(raw.back());
    }
  }
  d.hdr.norm = normalize_dataset(raw);
  d.samples.reserve(raw.size());
  for (const auto& s : raw) d.samples.push_back(s.cast<float>());
  if (stats != nullptr) {
    stats->mean_kept_energy = kept_sum / count;
    stats->mean_top10_share = top10_sum / count;
  }
  return d;
}

void write_dataset(const std::string& path, const Dataset& d) {
  json j;
  j["version"] = d.hdr.version;
  j["nc"] = d.hdr.nc;
  j["nt"] = d.hdr.nt;
  j["na"] = d.hdr.na;
  j["count"] = d.hdr.count;
  j["n_train"] = d.hdr.n_train;
  j["n_val"] = d.hdr.n_val;
  j["n_test"] = d.hdr.n_test;
  j["offset"] = d.hdr.norm.offset;
  j["scale"] = d.hdr.norm.scale;
  j["seed"] = d.hdr.seed;
  j["scenario"] = d.hdr.scenario;
  j["spec"] = json::parse(d.hdr.spec.to_json());

  std::string bytes = j.dump();
  bytes += '\n';
  const std::size_t payload_off = bytes.size();
  for (const auto& s : d.samples) append_f32le(bytes, s.data(), s.size());
  const std::uint32_t crc =
      payload_crc32(bytes.data() + payload_off, bytes.size() - payload_off);
  append_u32le(bytes, crc);
  write_file(path, bytes);
}

Dataset read_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, off] = split_header_line(bytes);

  Dataset d;
  try {
    json j = json::parse(header);
    d.hdr.version = j.at("version").get<int>();
    d.hdr.nc = j.at("nc").get<int>();
    d.hdr.nt = j.at("nt").get<int>();
    d.hdr.na = j.at("na").get<int>();
    d.hdr.count = j.at("count").get<int>();
    d.hdr.n_train = j.at("n_train").get<int>();
    d.hdr.n_val = j.at("n_val").get<int>();
    d.hdr.n_test = j.at("n_test").get<int>();
    d.hdr.norm.offset = j.at("offset").get<double>();
    d.hdr.norm.scale = j.at("scale").get<double>();
    d.hdr.seed = j.at("seed").get<std::uint64_t>();
    d.hdr.scenario = j.at("scenario").get<std::string>();
    d.hdr.spec = MultipathSpec::from_json(j.at("spec").dump());
  } catch (const json::exception& e) {
    throw MalformedHeader(std::string("dataset header: ") + e.what());
  }
  if (d.hdr.version != 1) {
    throw MalformedHeader("unsupported dataset format version " + std::to_string(d.hdr.version));
  }
  if (d.hdr.count < 0 || d.hdr.n_train + d.hdr.n_val + d.hdr.n_test != d.hdr.count) {
    throw MalformedHeader("split sizes do not sum to the sample count");
  }

  const std::size_t sample_elems = 2u * static_cast<std::size_t>(d.hdr.na) * d.hdr.na;
  const std::size_t payload_len = sample_elems * sizeof(float) * static_cast<std::size_t>(d.hdr.count);
  if (bytes.size() < off + payload_len + 4) {
    throw TruncatedPayload("dataset payload is shorter than the declared sample count");
  }
  const std::uint32_t want = read_u32le(bytes, off + payload_len);
  const std::uint32_t got = payload_crc32(bytes.data() + off, payload_len);
  if (want != got) {
    throw ChecksumMismatch("dataset payload CRC " + std::to_string(got) +
                           " does not match recorded " + std::to_string(want));
  }

  d.samples.reserve(static_cast<std::size_t>(d.hdr.count));
  const char* p = bytes.data() + off;
  for (int i = 0; i < d.hdr.count; ++i) {
    Tensor<float> s({2, d.hdr.na, d.hdr.na});
    std::memcpy(s.data(), p, sample_elems * sizeof(float));
    p += sample_elems * sizeof(float);
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace clnet
