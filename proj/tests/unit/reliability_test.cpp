#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "p4g/error.hpp"
#include "p4g/reliability.hpp"
#include "synthetic.hpp"

using namespace p4g;

namespace {

CodingMatrix from_pairs(const std::vector<std::pair<std::string, std::string>>& items) {
  std::vector<CodingMatrix::Record> rec;
  for (size_t i = 0; i < items.size(); ++i) {
    rec.push_back({"i" + std::to_string(i), "c1", items[i].first});
    rec.push_back({"i" + std::to_string(i), "c2", items[i].second});
  }
  return CodingMatrix::from_records(rec);
}

// Pairwise definition: mismatching ordered pairs within items, each item
// weighted 1/(m-1), against all mismatching pairs of pairable values.
double pairwise_alpha(const std::vector<std::vector<int>>& units, int categories) {
  double observed = 0, n = 0;
  std::vector<double> freq(static_cast<size_t>(categories), 0);
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    double mismatches = 0;
    for (size_t a = 0; a < u.size(); ++a)
      for (size_t b = 0; b < u.size(); ++b)
        if (a != b && u[a] != u[b]) mismatches += 1;
    observed += mismatches / static_cast<double>(u.size() - 1);
    for (int v : u) freq[static_cast<size_t>(v)] += 1;
    n += static_cast<double>(u.size());
  }
  double expected = 0;
  for (int c = 0; c < categories; ++c)
    for (int k = 0; k < categories; ++k)
      if (c != k) expected += freq[static_cast<size_t>(c)] * freq[static_cast<size_t>(k)];
  return 1.0 - (n - 1) * observed / expected;
}

struct Random {
  CodingMatrix matrix;
  std::vector<std::vector<int>> units;
};

Random random_matrix(std::mt19937_64& rng) {
  const int items = std::uniform_int_distribution<int>(5, 30)(rng);
  const int coders = std::uniform_int_distribution<int>(2, 5)(rng);
  const int cats = std::uniform_int_distribution<int>(2, 5)(rng);
  std::uniform_int_distribution<int> cat(0, cats - 1);
  std::bernoulli_distribution missing(0.15);
  std::vector<CodingMatrix::Record> rec;
  Random r;
  for (int i = 0; i < items; ++i) {
    std::vector<int> unit;
    for (int c = 0; c < coders; ++c) {
      if (missing(rng)) continue;
      const int v = cat(rng);
      unit.push_back(v);
      rec.push_back({"item" + std::to_string(i), "coder" + std::to_string(c), "L" + std::to_string(v)});
    }
    r.units.push_back(unit);
  }
  r.matrix = CodingMatrix::from_records(rec);
  return r;
}

}  // namespace

TEST(Alpha, PerfectAgreementIsExactlyOne) {
  const auto m = from_pairs({{"A", "A"}, {"B", "B"}, {"C", "C"}, {"A", "A"}});
  EXPECT_EQ(alpha_nominal(m), 1.0);
}

TEST(Alpha, WorkedFourItemExample) {
  // (A,A) (A,B) (B,B) (B,B): observed disagreement 2/8, expected 30/56.
  const auto m = from_pairs({{"A", "A"}, {"A", "B"}, {"B", "B"}, {"B", "B"}});
  const double oracle = 1.0 - 0.25 / (30.0 / 56.0);
  EXPECT_NEAR(oracle, 0.5333, 1e-4);
  EXPECT_NEAR(alpha_nominal(m), oracle, 1e-12);
  const auto o = coincidence(m);
  EXPECT_DOUBLE_EQ(o.total(), 8.0);
  EXPECT_DOUBLE_EQ(o.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(o.at(1, 1), 4.0);
}

TEST(Alpha, SingleCategoryIsUndefined) {
  const auto m = from_pairs({{"A", "A"}, {"A", "A"}});
  EXPECT_THROW(alpha_nominal(m), DomainError);
}

TEST(Alpha, ItemsWithOneValueAreExcluded) {
  std::vector<CodingMatrix::Record> rec = {
      {"1", "a", "X"}, {"1", "b", "X"}, {"2", "a", "Y"}, {"2", "b", "Y"}, {"3", "a", "X"}, {"3", "b", ""}};
  const auto o = coincidence(CodingMatrix::from_records(rec));
  EXPECT_EQ(o.excluded_items, 1u);
  EXPECT_DOUBLE_EQ(o.total(), 4.0);
}

TEST(Alpha, FewerThanTwoCodersRejected) {
  std::vector<CodingMatrix::Record> rec = {{"1", "a", "X"}, {"2", "a", "Y"}};
  EXPECT_THROW(alpha_nominal(CodingMatrix::from_records(rec)), DomainError);
}

TEST(Alpha, MatchesPairwiseDefinitionOnRandomMatrices) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_matrix(rng);
    double expected;
    try {
      expected = pairwise_alpha(r.units, 5);
    } catch (...) {
      continue;
    }
    if (!std::isfinite(expected)) continue;
    EXPECT_NEAR(alpha_nominal(r.matrix), expected, 1e-12) << "trial " << trial;
  }
}

TEST(Alpha, InvariantUnderPermutationAndRelabeling) {
  std::mt19937_64 rng(5);
  size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_matrix(rng);
    double base;
    try {
      base = alpha_nominal(r.matrix);
    } catch (const DomainError&) {
      continue;
    }
    std::vector<CodingMatrix::Record> rec;
    for (size_t i = 0; i < r.matrix.items.size(); ++i)
      for (size_t c = 0; c < r.matrix.coders.size(); ++c)
        if (auto v = r.matrix.values[i][c])
          rec.push_back({r.matrix.items[i], r.matrix.coders[c], r.matrix.categories[static_cast<size_t>(*v)]});
    std::shuffle(rec.begin(), rec.end(), rng);
    std::vector<std::string> names = r.matrix.categories;
    std::vector<std::string> renamed(names.size());
    for (size_t k = 0; k < names.size(); ++k) renamed[k] = "new" + std::to_string((k * 7 + 3) % 101);
    for (auto& x : rec) {
      const auto pos = std::find(names.begin(), names.end(), x.label) - names.begin();
      x.label = renamed[static_cast<size_t>(pos)];
    }
    EXPECT_NEAR(alpha_nominal(CodingMatrix::from_records(rec)), base, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 80u);
}

TEST(Alpha, PerCategoryBinaryRecoding) {
  const auto m = from_pairs({{"A", "A"}, {"A", "B"}, {"B", "B"}, {"C", "C"}});
  const auto per = alpha_per_category(m);
  ASSERT_EQ(per.size(), 3u);
  ASSERT_TRUE(per.at("C").has_value());
  EXPECT_EQ(*per.at("C"), 1.0);
  // Category A vs rest: pairs (1,1) (1,0) (0,0) (0,0).
  const auto binary = from_pairs({{"1", "1"}, {"1", "0"}, {"0", "0"}, {"0", "0"}});
  EXPECT_NEAR(*per.at("A"), alpha_nominal(binary), 1e-12);
}

TEST(Alpha, LoadsCsv) {
  p4g::testing::TempDir dir;
  p4g::testing::write_text(dir / "codes.csv",
                           "item_id,coder_id,label\n1,a,A\n1,b,A\n2,a,A\n2,b,B\n3,a,B\n3,b,B\n4,a,B\n4,b,B\n");
  EXPECT_NEAR(alpha_nominal(CodingMatrix::load_csv((dir / "codes.csv").string())), 1.0 - 0.25 / (30.0 / 56.0),
              1e-12);
}
