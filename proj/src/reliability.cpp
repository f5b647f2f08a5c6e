#include "p4g/reliability.hpp"

#include <algorithm>
#include <map>

#include "p4g/csv.hpp"
#include "p4g/error.hpp"
#include "p4g/text.hpp"

namespace p4g {

CodingMatrix CodingMatrix::from_records(const std::vector<Record>& records) {
  CodingMatrix m;
  std::map<std::string, int> cat, item, coder;
  auto intern = [](std::map<std::string, int>& idx, std::vector<std::string>& names,
                   const std::string& name) {
    auto [it, inserted] = idx.emplace(name, static_cast<int>(names.size()));
    if (inserted) names.push_back(name);
    return it->second;
  };
  std::vector<std::tuple<int, int, std::optional<int>>> cells;
  for (const auto& r : records) {
    const int i = intern(item, m.items, r.item);
    const int c = intern(coder, m.coders, r.coder);
    std::optional<int> v;
    if (!trim(r.label).empty()) v = intern(cat, m.categories, trim(r.label));
    cells.emplace_back(i, c, v);
  }
  m.values.assign(m.items.size(), std::vector<std::optional<int>>(m.coders.size()));
  for (const auto& [i, c, v] : cells) {
    auto& slot = m.values[static_cast<size_t>(i)][static_cast<size_t>(c)];
    if (slot && v && *slot != *v)
      throw ParseError("coder '" + m.coders[static_cast<size_t>(c)] + "' gave two labels to item '" +
                       m.items[static_cast<size_t>(i)] + "'");
    if (v) slot = v;
  }
  return m;
}

CodingMatrix CodingMatrix::load_csv(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw SchemaError(path + ": empty file");
  csv::Table table(rows.front());
  auto item = table.column("item_id");
  auto coder = table.column("coder_id");
  auto label = table.column("label");
  if (!item || !coder || !label) throw SchemaError(path + ": need columns item_id, coder_id, label");
  std::vector<Record> records;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](size_t i) { return i < row.size() ? trim(row[i]) : std::string(); };
    records.push_back({get(*item), get(*coder), get(*label)});
  }
  return from_records(records);
}

void CodingMatrix::validate() const {
  if (coders.size() < 2) throw DomainError("coding matrix needs at least 2 coders");
  for (const auto& row : values) {
    if (row.size() != coders.size()) throw DomainError("ragged coding matrix");
    for (const auto& v : row)
      if (v && (*v < 0 || static_cast<size_t>(*v) >= categories.size()))
        throw DomainError("label outside the declared category set");
  }
}

double Coincidence::total() const {
  double t = 0;
  for (double v : counts) t += v;
  return t;
}

std::vector<double> Coincidence::marginals() const {
  std::vector<double> n(size, 0.0);
  for (size_t c = 0; c < size; ++c)
    for (size_t k = 0; k < size; ++k) n[c] += at(c, k);
  return n;
}

Coincidence coincidence(const CodingMatrix& matrix) {
  matrix.validate();
  Coincidence o;
  o.size = matrix.categories.size();
  o.counts.assign(o.size * o.size, 0.0);
  std::vector<size_t> per_cat(o.size);
  for (size_t i = 0; i < matrix.values.size(); ++i) {
    std::fill(per_cat.begin(), per_cat.end(), 0);
    size_t m = 0;
    for (const auto& v : matrix.values[i])
      if (v) {
        ++per_cat[static_cast<size_t>(*v)];
        ++m;
      }
    if (m < 2) {
      ++o.excluded_items;
      o.warnings.push_back("item '" + matrix.items[i] + "' has fewer than 2 labels; excluded");
      continue;
    }
    // Ordered pairs of values from different coders, weighted 1/(m-1).
    const double w = 1.0 / static_cast<double>(m - 1);
    for (size_t c = 0; c < o.size; ++c) {
      if (!per_cat[c]) continue;
      for (size_t k = 0; k < o.size; ++k) {
        const double pairs = c == k ? static_cast<double>(per_cat[c] * (per_cat[c] - 1))
                                    : static_cast<double>(per_cat[c] * per_cat[k]);
        o.counts[c * o.size + k] += pairs * w;
      }
    }
  }
  return o;
}

double alpha_nominal(const Coincidence& o) {
  const auto n_c = o.marginals();
  double n = 0;
  for (double v : n_c) n += v;
  double observed = 0, expected = 0;
  for (size_t c = 0; c < o.size; ++c)
    for (size_t k = 0; k < o.size; ++k)
      if (c != k) {
        observed += o.at(c, k);
        expected += n_c[c] * n_c[k];
      }
  if (n <= 1 || expected <= 0)
    throw DomainError("alpha undefined: fewer than two categories observed");
  const double d_o = observed / n;
  const double d_e = expected / (n * (n - 1));
  return 1.0 - d_o / d_e;
}

double alpha_nominal(const CodingMatrix& matrix) { return alpha_nominal(coincidence(matrix)); }

std::map<std::string, std::optional<double>> alpha_per_category(const CodingMatrix& matrix) {
  std::map<std::string, std::optional<double>> out;
  for (size_t c = 0; c < matrix.categories.size(); ++c) {
    CodingMatrix binary;
    binary.categories = {"rest", matrix.categories[c]};
    binary.items = matrix.items;
    binary.coders = matrix.coders;
    binary.values = matrix.values;
    for (auto& row : binary.values)
      for (auto& v : row)
        if (v) v = (*v == static_cast<int>(c)) ? 1 : 0;
    try {
      out[matrix.categories[c]] = alpha_nominal(binary);
    } catch (const DomainError&) {
      out[matrix.categories[c]] = std::nullopt;
    }
  }
  return out;
}

}  // namespace p4g
