#pragma once

#include <stdexcept>
#include <string>

namespace clnet {

/// Compression ratio eta, kept as an exact fraction. The flag surface uses
/// the strings "1/4" ... "1/64"; no floats are parsed.
struct EtaRatio {
  int num = 1;
  int den = 4;

  bool operator==(const EtaRatio&) const = default;
};

inline bool eta_supported(EtaRatio e) {
  if (e.num != 1) return false;
  return e.den == 4 || e.den == 8 || e.den == 16 || e.den == 32 || e.den == 64;
}

inline EtaRatio parse_eta(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 >= s.size()) {
    throw std::invalid_argument("eta must be written as a fraction like 1/4, got '" + s + "'");
  }
  EtaRatio e;
  try {
    std::size_t a = 0, b = 0;
    e.num = std::stoi(s.substr(0, slash), &a);
    e.den = std::stoi(s.substr(slash + 1), &b);
    if (a != slash || b != s.size() - slash - 1) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("eta must be written as a fraction like 1/4, got '" + s + "'");
  }
  if (!eta_supported(e)) {
    throw std::invalid_argument("unsupported eta '" + s + "'; expected one of 1/4, 1/8, 1/16, 1/32, 1/64");
  }
  return e;
}

inline std::string eta_str(EtaRatio e) {
  return std::to_string(e.num) + "/" + std::to_string(e.den);
}

/// Codeword length M = floor(2 * Na^2 * eta).
inline int codeword_len(EtaRatio e, int na) {
  return static_cast<int>((2LL * na * na * e.num) / e.den);
}

}  // namespace clnet
