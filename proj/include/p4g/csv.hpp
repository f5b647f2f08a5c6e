#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace p4g::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. A UTF-8 BOM on the first field is dropped.
class Reader {
 public:
  explicit Reader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

  // Returns false at end of input. `line` is the 1-based physical line on
  // which the record started.
  bool next(Row& row);
  size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char sep_;
  size_t physical_line_ = 1;
  size_t record_line_ = 0;
  bool first_ = true;
};

// Header-indexed view over one record.
class Table {
 public:
  explicit Table(Row header);
  std::optional<size_t> column(std::string_view name) const;
  const Row& header() const { return header_; }

 private:
  Row header_;
  std::map<std::string, size_t, std::less<>> index_;
};

std::string quote(std::string_view field, char sep = ',');
void write_row(std::ostream& out, const Row& row, char sep = ',');

std::vector<Row> read_file(const std::string& path, char sep = ',');

}  // namespace p4g::csv
