#include <sbt/date.hpp>

#include <charconv>

#include <fmt/format.h>

namespace sbt {

namespace {

bool parse_digits(std::string_view s, int& out) {
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::optional<Date> Date::parse(std::string_view text) {
  if (text.size() > 10) {
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    text = text.substr(0, 10);
  }
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
      !parse_digits(text.substr(8, 2), d))
    return std::nullopt;
  Date date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string Date::to_string() const {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd_.year()),
                     static_cast<unsigned>(ymd_.month()), static_cast<unsigned>(ymd_.day()));
}

}  // namespace sbt
