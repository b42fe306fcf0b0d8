#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace gg {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a. `state` lets callers hash a stream incrementally.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// splitmix64 finalizer; spreads FNV output across all 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string hex64(std::uint64_t value);

/// CRC-32 (IEEE 802.3), as used by zlib and PNG.
std::uint32_t crc32(std::span<const unsigned char> bytes);

}  // namespace gg
