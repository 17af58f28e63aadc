#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sbt::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and line
// breaks. CRLF and LF line endings are both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads the next record; returns false at end of input.
  bool next(Row& row);

  // 1-based line number where the most recently returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// Maps header names to column positions.
class Header {
 public:
  Header() = default;
  explicit Header(const Row& names);

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws MissingColumn naming `source` when any required column is absent.
  void require(std::span<const std::string_view> names, std::string_view source) const;
  std::size_t at(std::string_view name) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

std::string escape(std::string_view field);
void write_row(std::ostream& out, std::span<const std::string> fields);
void write_row(std::ostream& out, std::initializer_list<std::string_view> fields);

}  // namespace sbt::csv
