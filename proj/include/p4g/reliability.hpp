#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace p4g {

// Items x coders grid of nominal labels. Category values index `categories`.
struct CodingMatrix {
  std::vector<std::string> categories;
  std::vector<std::string> items;
  std::vector<std::string> coders;
  std::vector<std::vector<std::optional<int>>> values;  // [item][coder]

  // Builds a matrix from (item, coder, label) triples. Categories, items and
  // coders are ordered by first appearance; empty labels are missing.
  struct Record {
    std::string item;
    std::string coder;
    std::string label;
  };
  static CodingMatrix from_records(const std::vector<Record>& records);
  static CodingMatrix load_csv(const std::string& path);

  void validate() const;
};

// Square category x category coincidence counts.
struct Coincidence {
  size_t size = 0;
  std::vector<double> counts;  // row-major
  size_t excluded_items = 0;
  std::vector<std::string> warnings;

  double at(size_t c, size_t k) const { return counts[c * size + k]; }
  double total() const;
  std::vector<double> marginals() const;
};

Coincidence coincidence(const CodingMatrix& matrix);

// Krippendorff's alpha for nominal data. Throws DomainError when only one
// category is observed, since the expected disagreement is then zero.
double alpha_nominal(const CodingMatrix& matrix);
double alpha_nominal(const Coincidence& o);

// Each category recoded as category-vs-rest. Categories whose binary
// recoding has no variance map to nullopt.
std::map<std::string, std::optional<double>> alpha_per_category(const CodingMatrix& matrix);

}  // namespace p4g
