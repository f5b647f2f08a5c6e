#include "p4g/csv.hpp"

#include <fstream>

#include "p4g/error.hpp"

namespace p4g::csv {

bool Reader::next(Row& row) {
  row.clear();
  int ch = in_.get();
  if (ch == std::char_traits<char>::eof()) return false;
  record_line_ = physical_line_;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  for (;; ch = in_.get()) {
    if (ch == std::char_traits<char>::eof()) {
      row.push_back(std::move(field));
      break;
    }
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in_.peek() == '"') {
          field.push_back('"');
          in_.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++physical_line_;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (c == sep_) {
      row.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      ++physical_line_;
      row.push_back(std::move(field));
      break;
    } else {
      field.push_back(c);
    }
  }
  if (first_) {
    first_ = false;
    if (!row.empty() && row[0].rfind("\xEF\xBB\xBF", 0) == 0) row[0].erase(0, 3);
  }
  return true;
}

Table::Table(Row header) : header_(std::move(header)) {
  for (size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
}

std::optional<size_t> Table::column(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string quote(std::string_view field, char sep) {
  const bool needs = field.find_first_of(std::string{'"', '\n', '\r', sep}) != std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char sep) {
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out.put(sep);
    out << quote(row[i], sep);
  }
  out.put('\n');
}

std::vector<Row> read_file(const std::string& path, char sep) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  Reader reader(in, sep);
  std::vector<Row> rows;
  Row row;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace p4g::csv
