#include "clnet/io_util.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <utility>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

namespace clnet {

std::uint32_t payload_crc32(const void* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

void append_u32le(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void append_f32le(std::string& out, const float* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(float));
}

std::uint32_t read_u32le(const std::string& buf, std::size_t off) {
  if (off + 4 > buf.size()) throw TruncatedPayload("file ends inside a 32-bit field");
  std::uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  return v;
}

void write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move '" + tmp + "' into place at '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

std::pair<std::string, std::size_t> split_header_line(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw MalformedHeader("missing newline-terminated header line");
  }
  return {bytes.substr(0, nl), nl + 1};
}

}  // namespace clnet
