#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vlnmine {

// 64-bit FNV-1a. Used for deterministic record ids and prompt/config
// fingerprints; not a cryptographic hash.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

inline std::string fnv1a64_hex(std::string_view data) {
  return to_hex(fnv1a64(data));
}

}  // namespace vlnmine
