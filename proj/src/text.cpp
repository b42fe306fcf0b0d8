#include "gg/text.hpp"

#include <cstdint>

namespace gg::text {
namespace {

bool is_white_space(char32_t cp) {
  switch (cp) {
    case 0x0085: case 0x00A0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return (cp >= 0x0009 && cp <= 0x000D) || cp == 0x0020 || (cp >= 0x2000 && cp <= 0x200A);
  }
}

}  // namespace

std::size_t whitespace_prefix(std::string_view s) {
  if (s.empty()) return 0;
  const auto b0 = static_cast<unsigned char>(s[0]);
  if (b0 < 0x80) return is_white_space(b0) ? 1 : 0;
  // Only 2- and 3-byte sequences can encode White_Space code points.
  if ((b0 & 0xE0) == 0xC0 && s.size() >= 2) {
    const auto b1 = static_cast<unsigned char>(s[1]);
    if ((b1 & 0xC0) != 0x80) return 0;
    const char32_t cp = (char32_t(b0 & 0x1F) << 6) | (b1 & 0x3F);
    return is_white_space(cp) ? 2 : 0;
  }
  if ((b0 & 0xF0) == 0xE0 && s.size() >= 3) {
    const auto b1 = static_cast<unsigned char>(s[1]);
    const auto b2 = static_cast<unsigned char>(s[2]);
    if ((b1 & 0xC0) != 0x80 || (b2 & 0xC0) != 0x80) return 0;
    const char32_t cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(b1 & 0x3F) << 6) | (b2 & 0x3F);
    return is_white_space(cp) ? 3 : 0;
  }
  return 0;
}

std::string_view trim(std::string_view s) {
  while (std::size_t n = whitespace_prefix(s)) s.remove_prefix(n);
  // Walk forward to find the last non-space boundary; UTF-8 can't be scanned
  // backwards byte-wise without decoding.
  std::size_t end = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::size_t n = whitespace_prefix(s.substr(i))) {
      i += n;
    } else {
      ++i;
      end = i;
    }
  }
  return s.substr(0, end);
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string fold_key(std::string_view s) {
  std::string out;
  bool pending_space = false;
  std::size_t i = 0;
  s = trim(s);
  while (i < s.size()) {
    if (std::size_t n = whitespace_prefix(s.substr(i))) {
      pending_space = true;
      i += n;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    char c = s[i++];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

std::string join(std::span<const std::string_view> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace gg::text
