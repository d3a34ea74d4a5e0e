#include "clnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "clnet/io_util.hpp"

namespace clnet {

using json = nlohmann::json;

Codeword encode(const Tensor<float>& ha, const Model<float>& model) {
  const int na = model.info().na;
  if (ha.rank() != 3 || ha.extent(0) != 2 || ha.extent(1) != na || ha.extent(2) != na) {
    throw ShapeError("encode: sample " + shape_str(ha.shape()) + " does not match model grid [2x" +
                     std::to_string(na) + "x" + std::to_string(na) + "]");
  }
  auto v = model.encode_batch(ha.reshaped({1, 2, na, na}));
  Codeword cw;
  cw.v.assign(v.data(), v.data() + v.size());
  cw.model_id = model.info().arch;
  cw.eta = model.info().eta;
  return cw;
}

Tensor<float> decode(const Codeword& cw, const Model<float>& model) {
  const int m = model.info().codeword_length();
  if (static_cast<int>(cw.v.size()) != m) {
    throw ShapeError("decode: codeword length " + std::to_string(cw.v.size()) +
                     " does not match model bottleneck " + std::to_string(m));
  }
  const int na = model.info().na;
  Tensor<float> v({1, m}, std::vector<float>(cw.v.begin(), cw.v.end()));
  auto y = model.decode_batch(v);
  return std::move(y).reshaped({2, na, na});
}

Nmse nmse(const Tensor<float>& truth, const Tensor<float>& est) {
  if (!truth.same_shape(est)) {
    throw ShapeError("nmse: shapes " + shape_str(truth.shape()) + " and " +
                     shape_str(est.shape()) + " differ");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = truth[i];
    const double d = t - static_cast<double>(est[i]);
    num += d * d;
    den += t * t;
  }
  if (den <= 0.0) throw std::invalid_argument("nmse: ground truth has zero energy");
  Nmse r;
  r.linear = num / den;
  r.db = r.linear > 0.0 ? std::max(10.0 * std::log10(r.linear), kNmseDbFloor) : kNmseDbFloor;
  return r;
}

Nmse aggregate_nmse(const std::vector<double>& per_sample_linear) {
  if (per_sample_linear.empty()) throw std::invalid_argument("nmse: no samples");
  double s = 0.0;
  for (double v : per_sample_linear) s += v;
  Nmse r;
  r.linear = s / static_cast<double>(per_sample_linear.size());
  r.db = r.linear > 0.0 ? std::max(10.0 * std::log10(r.linear), kNmseDbFloor) : kNmseDbFloor;
  return r;
}

namespace {

void denormalize_into(Tensor<float>& t, const NormMeta& norm) {
  const float scale = static_cast<float>(norm.scale);
  const float offset = static_cast<float>(norm.offset);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] * scale + offset;
}

}  // namespace

EvalReport evaluate(const Model<float>& model, const Dataset& data, const std::string& split,
                    int batch) {
  int begin = 0, count = 0;
  if (split == "train") {
    begin = 0;
    count = data.hdr.n_train;
  } else if (split == "val") {
    begin = data.hdr.n_train;
    count = data.hdr.n_val;
  } else if (split == "test") {
    begin = data.hdr.n_train + data.hdr.n_val;
    count = data.hdr.n_test;
  } else {
    throw std::invalid_argument("unknown split '" + split + "'");
  }
  const int na = data.hdr.na;
  if (na != model.info().na) {
    throw ShapeError("dataset grid " + std::to_string(na) + " does not match model grid " +
                     std::to_string(model.info().na));
  }

  EvalReport rep;
  rep.count = count;
  rep.eta = model.info().eta;
  rep.scenario = data.hdr.scenario;
  rep.per_sample_linear.reserve(static_cast<std::size_t>(count));

  const std::size_t elems = 2u * static_cast<std::size_t>(na) * na;
  for (int off = 0; off < count; off += batch) {
    const int b = std::min(batch, count - off);
    Tensor<float> x({b, 2, na, na});
    for (int i = 0; i < b; ++i) {
      std::memcpy(x.data() + static_cast<std::size_t>(i) * elems,
                  data.samples[static_cast<std::size_t>(begin + off + i)].data(),
                  elems * sizeof(float));
    }
    auto y = model.forward_batch(x);
    for (int i = 0; i < b; ++i) {
      Tensor<float> truth = data.samples[static_cast<std::size_t>(begin + off + i)];
      Tensor<float> est({2, na, na});
      std::memcpy(est.data(), y.data() + static_cast<std::size_t>(i) * elems,
                  elems * sizeof(float));
      denormalize_into(truth, data.hdr.norm);
      denormalize_into(est, data.hdr.norm);
      rep.per_sample_linear.push_back(nmse(truth, est).linear);
    }
  }
  const Nmse agg = aggregate_nmse(rep.per_sample_linear);
  rep.linear = agg.linear;
  rep.db = agg.db;
  return rep;
}

double validation_nmse_db(const Model<float>& model, const Dataset& data, int batch) {
  return evaluate(model, data, "val", batch).db;
}

std::string eval_report_text(const EvalReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "samples=%d\n", r.count);
  out += buf;
  std::snprintf(buf, sizeof(buf), "eta=%s\n", eta_str(r.eta).c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "scenario=%s\n", r.scenario.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "nmse_linear=%.9g\n", r.linear);
  out += buf;
  std::snprintf(buf, sizeof(buf), "nmse_db=%.6f\n", r.db);
  out += buf;
  return out;
}

std::string eval_report_csv(const EvalReport& r) {
  std::string out = "sample_index,nmse_linear,nmse_db\n";
  char buf[128];
  for (std::size_t i = 0; i < r.per_sample_linear.size(); ++i) {
    const double lin = r.per_sample_linear[i];
    const double db = lin > 0.0 ? std::max(10.0 * std::log10(lin), kNmseDbFloor) : kNmseDbFloor;
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.6f\n", i, lin, db);
    out += buf;
  }
  return out;
}

void write_codewords(const std::string& path, const std::vector<Codeword>& cws, int na) {
  if (cws.empty()) throw std::invalid_argument("no codewords to write");
  const int m = codeword_len(cws[0].eta, na);
  for (const auto& cw : cws) {
    if (!(cw.eta == cws[0].eta) || cw.model_id != cws[0].model_id) {
      throw std::invalid_argument("codeword batch mixes models or ratios");
    }
    if (static_cast<int>(cw.v.size()) != m) {
      throw std::invalid_argument("codeword length " + std::to_string(cw.v.size()) +
                                  " disagrees with eta " + eta_str(cw.eta) + " at na " +
                                  std::to_string(na) + " (expected " + std::to_string(m) + ")");
    }
  }
  json j;
  j["version"] = 1;
  j["model_id"] = cws[0].model_id;
  j["eta"] = eta_str(cws[0].eta);
  j["m"] = m;
  j["count"] = static_cast<int>(cws.size());
  std::string bytes = j.dump();
  bytes += '\n';
  const std::size_t payload_off = bytes.size();
  for (const auto& cw : cws) append_f32le(bytes, cw.v.data(), cw.v.size());
  append_u32le(bytes, payload_crc32(bytes.data() + payload_off, bytes.size() - payload_off));
  write_file(path, bytes);
}

std::vector<Codeword> read_codewords(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, off] = split_header_line(bytes);
  std::string model_id;
  EtaRatio eta;
  int m = 0, count = 0;
  try {
    json j = json::parse(header);
    if (j.at("version").get<int>() != 1) throw MalformedHeader("unsupported codeword file version");
    model_id = j.at("model_id").get<std::string>();
    eta = parse_eta(j.at("eta").get<std::string>());
    m = j.at("m").get<int>();
    count = j.at("count").get<int>();
  } catch (const json::exception& e) {
    throw MalformedHeader(std::string("codeword header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedHeader(std::string("codeword header: ") + e.what());
  }
  if (m < 1 || count < 1) throw MalformedHeader("codeword header declares an empty payload");

  const std::size_t payload_len = static_cast<std::size_t>(m) * count * sizeof(float);
  if (bytes.size() < off + payload_len + 4) {
    throw TruncatedPayload("codeword payload is shorter than the declared count");
  }
  const std::uint32_t want = read_u32le(bytes, off + payload_len);
  const std::uint32_t got = payload_crc32(bytes.data() + off, payload_len);
  if (want != got) {
    throw ChecksumMismatch("codeword payload CRC " + std::to_string(got) +
                           " does not match recorded " + std::to_string(want));
  }

  std::vector<Codeword> cws(static_cast<std::size_t>(count));
  const char* p = bytes.data() + off;
  for (auto& cw : cws) {
    cw.model_id = model_id;
    cw.eta = eta;
    cw.v.resize(static_cast<std::size_t>(m));
    std::memcpy(cw.v.data(), p, static_cast<std::size_t>(m) * sizeof(float));
    p += static_cast<std::size_t>(m) * sizeof(float);
  }
  return cws;
}

}  // namespace clnet
