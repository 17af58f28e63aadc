#include <sbt/text.hpp>

#include <cstdint>

namespace sbt {

namespace {

// Length of the well-formed prefix of a sequence starting at `i`, or the
// length of its maximal ill-formed subpart (negated) when it is invalid.
int scan_sequence(std::string_view s, std::size_t i) {
  const auto byte = [&](std::size_t k) { return static_cast<std::uint8_t>(s[k]); };
  const std::uint8_t lead = byte(i);
  if (lead < 0x80) return 1;

  int need = 0;
  std::uint8_t lo = 0x80, hi = 0xBF;  // bounds for the first continuation byte
  if (lead >= 0xC2 && lead <= 0xDF) {
    need = 1;
  } else if (lead == 0xE0) {
    need = 2;
    lo = 0xA0;
  } else if (lead >= 0xE1 && lead <= 0xEC) {
    need = 2;
  } else if (lead == 0xED) {
    need = 2;
    hi = 0x9F;  // excludes surrogates
  } else if (lead >= 0xEE && lead <= 0xEF) {
    need = 2;
  } else if (lead == 0xF0) {
    need = 3;
    lo = 0x90;
  } else if (lead >= 0xF1 && lead <= 0xF3) {
    need = 3;
  } else if (lead == 0xF4) {
    need = 3;
    hi = 0x8F;
  } else {
    return -1;
  }

  int consumed = 1;
  for (int k = 0; k < need; ++k) {
    const std::size_t pos = i + 1 + static_cast<std::size_t>(k);
    if (pos >= s.size()) return -consumed;
    const std::uint8_t c = byte(pos);
    const std::uint8_t min = k == 0 ? lo : 0x80;
    const std::uint8_t max = k == 0 ? hi : 0xBF;
    if (c < min || c > max) return -consumed;
    ++consumed;
  }
  return consumed;
}

}  // namespace

std::string sanitize_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const int n = scan_sequence(bytes, i);
    if (n > 0) {
      out.append(bytes.substr(i, static_cast<std::size_t>(n)));
      i += static_cast<std::size_t>(n);
    } else {
      out.append(kReplacementChar);
      i += static_cast<std::size_t>(-n);
    }
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const int n = scan_sequence(bytes, i);
    if (n < 0) return false;
    i += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace sbt
