#pragma once

#include <span>
#include <string>
#include <string_view>

namespace gg::text {

/// Length in bytes of the Unicode White_Space code point starting at `s[0]`,
/// or 0 if `s` does not start with one.
std::size_t whitespace_prefix(std::string_view s);

/// Strips leading and trailing Unicode whitespace.
std::string_view trim(std::string_view s);

/// ASCII lowercase; other bytes pass through.
std::string ascii_lower(std::string_view s);

/// Lowercased, trimmed, inner whitespace runs collapsed to one space.
std::string fold_key(std::string_view s);

std::string join(std::span<const std::string_view> parts, std::string_view sep);

}  // namespace gg::text
