#include <sbt/csv.hpp>

#include <sbt/error.hpp>

#include <fmt/format.h>

namespace sbt::csv {

bool Reader::next(Row& row) {
  row.clear();
  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return false;

  record_line_ = line_;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (;; c = in_.get()) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted)
        throw Error(ErrorCode::ParseError,
                    fmt::format("unterminated quoted field starting on line {}", record_line_));
      row.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          field.push_back('"');
          in_.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (ch == '\r' && in_.peek() == '\n') {
      continue;
    } else if (ch == '\n') {
      ++line_;
      row.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
}

Header::Header(const Row& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string name = names[i];
    // Tolerate a UTF-8 byte-order mark on the first column.
    if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
    index_.emplace(std::move(name), i);
  }
}

std::optional<std::size_t> Header::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Header::require(std::span<const std::string_view> names, std::string_view source) const {
  for (auto name : names)
    if (!find(name))
      throw Error(ErrorCode::MissingColumn, fmt::format("{}: header lacks column '{}'", source, name));
}

std::size_t Header::at(std::string_view name) const {
  auto pos = find(name);
  if (!pos) throw Error(ErrorCode::MissingColumn, fmt::format("header lacks column '{}'", name));
  return *pos;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

void write_row(std::ostream& out, std::initializer_list<std::string_view> fields) {
  bool first = true;
  for (auto f : fields) {
    if (!first) out << ',';
    first = false;
    out << escape(f);
  }
  out << '\n';
}

}  // namespace sbt::csv
