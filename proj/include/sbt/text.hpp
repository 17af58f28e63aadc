#pragma once

#include <string>
#include <string_view>

namespace sbt {

inline constexpr std::string_view kReplacementChar = "\xEF\xBF\xBD";  // U+FFFD

// Returns `bytes` as well-formed UTF-8. Each maximal ill-formed subsequence
// (stray continuation bytes, truncated sequences, overlongs, encoded
// surrogates, code points above U+10FFFF) becomes one U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

bool is_valid_utf8(std::string_view bytes);

}  // namespace sbt
