#include "clnet/checkpoint.hpp"

#include <cstring>
#include <utility>

#include <nlohmann/json.hpp>

#include "clnet/io_util.hpp"

namespace clnet {

using json = nlohmann::json;

namespace {

void append_named_tensor(std::string& out, const std::string& name, const Tensor<float>& t) {
  append_u32le(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  out.push_back(static_cast<char>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) append_u32le(out, static_cast<std::uint32_t>(t.extent(i)));
  append_f32le(out, t.data(), t.size());
}

std::pair<std::string, Tensor<float>> read_named_tensor(const std::string& bytes,
                                                        std::size_t& off) {
  const std::uint32_t name_len = read_u32le(bytes, off);
  off += 4;
  if (off + name_len > bytes.size()) throw TruncatedPayload("file ends inside a tensor name");
  std::string name = bytes.substr(off, name_len);
  off += name_len;
  if (off + 1 > bytes.size()) throw TruncatedPayload("file ends before a tensor rank");
  const int rank = static_cast<unsigned char>(bytes[off]);
  off += 1;
  std::vector<int> shape(static_cast<std::size_t>(rank));
  std::size_t elems = 1;
  for (int i = 0; i < rank; ++i) {
    shape[static_cast<std::size_t>(i)] = static_cast<int>(read_u32le(bytes, off));
    off += 4;
    elems *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
  }
  if (off + elems * sizeof(float) > bytes.size()) {
    throw TruncatedPayload("file ends inside tensor '" + name + "'");
  }
  Tensor<float> t(shape);
  std::memcpy(t.data(), bytes.data() + off, elems * sizeof(float));
  off += elems * sizeof(float);
  return {std::move(name), std::move(t)};
}

std::string check_crc_and_strip(const std::string& bytes, std::size_t payload_off,
                                const char* what) {
  if (bytes.size() < payload_off + 4) throw TruncatedPayload(std::string(what) + ": no CRC field");
  const std::size_t payload_len = bytes.size() - payload_off - 4;
  const std::uint32_t want = read_u32le(bytes, payload_off + payload_len);
  const std::uint32_t got = payload_crc32(bytes.data() + payload_off, payload_len);
  if (want != got) {
    throw ChecksumMismatch(std::string(what) + ": payload CRC " + std::to_string(got) +
                           " does not match recorded " + std::to_string(want));
  }
  return bytes.substr(payload_off, payload_len);
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model) {
  const ModelInfo& info = model.info();
  json j;
  j["version"] = 1;
  j["arch"] = info.arch;
  j["eta"] = eta_str(info.eta);
  j["na"] = info.na;
  j["c"] = info.c;
  j["cprime"] = info.cprime;
  j["seed"] = info.seed;
  j["gate"] = info.gate == Gate::HardSigmoid ? "hard_sigmoid" : "sigmoid";
  int n_params = 0;
  model.visit_params([&](const std::string&, Tensor<float>&) { ++n_params; });
  j["params"] = n_params;

  std::string bytes = j.dump();
  bytes += '\n';
  const std::size_t payload_off = bytes.size();
  model.visit_params(
      [&](const std::string& name, Tensor<float>& t) { append_named_tensor(bytes, name, t); });
  append_u32le(bytes, payload_crc32(bytes.data() + payload_off, bytes.size() - payload_off));
  write_file(path, bytes);
}

std::unique_ptr<Model<float>> load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, off] = split_header_line(bytes);
  ModelInfo info;
  int n_params = 0;
  try {
    json j = json::parse(header);
    if (j.at("version").get<int>() != 1) throw MalformedHeader("unsupported checkpoint version");
    info.arch = j.at("arch").get<std::string>();
    info.eta = parse_eta(j.at("eta").get<std::string>());
    info.na = j.at("na").get<int>();
    info.c = j.at("c").get<int>();
    info.cprime = j.at("cprime").get<int>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.gate = j.at("gate").get<std::string>() == "sigmoid" ? Gate::Sigmoid : Gate::HardSigmoid;
    n_params = j.at("params").get<int>();
  } catch (const json::exception& e) {
    throw MalformedHeader(std::string("checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedHeader(std::string("checkpoint header: ") + e.what());
  }

  const std::string payload = check_crc_and_strip(bytes, off, "checkpoint");
  auto model = assemble<float>(info);
  std::size_t pos = 0;
  int filled = 0;
  model->visit_params([&](const std::string& name, Tensor<float>& t) {
    auto [stored_name, stored] = read_named_tensor(payload, pos);
    if (stored_name != name) {
      throw MalformedHeader("checkpoint parameter '" + stored_name + "' where '" + name +
                            "' was expected");
    }
    if (!stored.same_shape(t)) {
      throw MalformedHeader("checkpoint parameter '" + name + "' has shape " +
                            shape_str(stored.shape()) + ", expected " + shape_str(t.shape()));
    }
    t = std::move(stored);
    ++filled;
  });
  if (filled != n_params || pos != payload.size()) {
    throw MalformedHeader("checkpoint parameter list does not match the declared count");
  }
  return model;
}

void save_train_state(const std::string& path, const AdamState& st) {
  json j;
  j["version"] = 1;
  j["step"] = st.step;
  j["epochs_done"] = st.epochs_done;
  j["tensors"] = static_cast<int>(st.m.size() + st.v.size());
  std::string bytes = j.dump();
  bytes += '\n';
  const std::size_t payload_off = bytes.size();
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    append_named_tensor(bytes, "m." + std::to_string(i), st.m[i]);
  }
  for (std::size_t i = 0; i < st.v.size(); ++i) {
    append_named_tensor(bytes, "v." + std::to_string(i), st.v[i]);
  }
  append_u32le(bytes, payload_crc32(bytes.data() + payload_off, bytes.size() - payload_off));
  write_file(path, bytes);
}

AdamState load_train_state(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, off] = split_header_line(bytes);
  AdamState st;
  int n_tensors = 0;
  try {
    json j = json::parse(header);
    if (j.at("version").get<int>() != 1) throw MalformedHeader("unsupported train-state version");
    st.step = j.at("step").get<std::int64_t>();
    st.epochs_done = j.at("epochs_done").get<int>();
    n_tensors = j.at("tensors").get<int>();
  } catch (const json::exception& e) {
    throw MalformedHeader(std::string("train-state header: ") + e.what());
  }
  const std::string payload = check_crc_and_strip(bytes, off, "train state");
  std::size_t pos = 0;
  for (int i = 0; i < n_tensors; ++i) {
    auto [name, t] = read_named_tensor(payload, pos);
    if (name.rfind("m.", 0) == 0) {
      st.m.push_back(std::move(t));
    } else if (name.rfind("v.", 0) == 0) {
      st.v.push_back(std::move(t));
    } else {
      throw MalformedHeader("train state holds unexpected tensor '" + name + "'");
    }
  }
  if (pos != payload.size() || st.m.size() != st.v.size()) {
    throw MalformedHeader("train-state tensor list does not match the declared count");
  }
  return st;
}

}  // namespace clnet
