#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clnet {

/// File-format failures, each with its own type so callers can act on the
/// exact condition.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MalformedHeader : public IoError {
 public:
  using IoError::IoError;
};
class TruncatedPayload : public IoError {
 public:
  using IoError::IoError;
};
class ChecksumMismatch : public IoError {
 public:
  using IoError::IoError;
};

std::uint32_t payload_crc32(const void* data, std::size_t len);

void append_u32le(std::string& out, std::uint32_t v);
void append_f32le(std::string& out, const float* data, std::size_t count);

std::uint32_t read_u32le(const std::string& buf, std::size_t off);

/// Whole-file helpers; write is atomic enough for single-writer use
/// (write to temp, rename).
void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);  // throws IoError if missing/unreadable

/// Splits "header line \n binary rest" at the first newline.
/// Throws MalformedHeader when there is no newline.
std::pair<std::string, std::size_t> split_header_line(const std::string& bytes);

}  // namespace clnet
