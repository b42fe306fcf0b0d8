#include "gg/hash.hpp"

#include <zlib.h>

#include <cstdio>

namespace gg {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint32_t crc32(std::span<const unsigned char> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const unsigned char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto step = static_cast<uInt>(left > 0x40000000u ? 0x40000000u : left);
    crc = ::crc32(crc, p, step);
    p += step;
    left -= step;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace gg
