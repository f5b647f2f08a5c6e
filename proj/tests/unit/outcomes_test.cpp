#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "p4g/error.hpp"
#include "p4g/outcomes.hpp"
#include "synthetic.hpp"

using namespace p4g;

namespace {

DesignMatrix simulate(size_t n, double b0, double b1, uint64_t seed, double scale = 1.0, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> x(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> xs(n), ys(n);
  std::vector<std::string> ids(n);
  for (size_t i = 0; i < n; ++i) {
    xs[i] = x(rng);
    ys[i] = u(rng) < 1.0 / (1.0 + std::exp(-(b0 + b1 * xs[i]))) ? 1.0 : 0.0;
    ids[i] = std::to_string(i);
  }
  for (auto& v : xs) v = v * scale + shift;
  return DesignBuilder(ids, ys).add("x", xs).build();
}

double log_likelihood(const DesignMatrix& d, double b0, double b1) {
  double ll = 0;
  for (size_t i = 0; i < d.rows(); ++i) {
    const double eta = b0 + b1 * d.x(static_cast<Eigen::Index>(i), 1);
    const double y = d.y(static_cast<Eigen::Index>(i));
    ll += y * eta - std::log1p(std::exp(eta));
  }
  return ll;
}

template <class F>
double golden_max(F f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  while (b - a > 1e-9) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (f(c) > f(d))
      b = d;
    else
      a = c;
  }
  return (a + b) / 2;
}

}  // namespace

TEST(Standardize, ZScoresWithPopulationSd) {
  const std::vector<double> v = {1, 2, 3};
  const auto z = standardize(v);
  EXPECT_NEAR(z[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
  EXPECT_NEAR(z[2], 1.224744871391589, 1e-12);
  const auto again = standardize(z);
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(again[i], z[i], 1e-12);
  EXPECT_THROW(standardize(std::vector<double>{4, 4, 4}), DomainError);
  EXPECT_THROW(standardize(std::vector<double>{1, std::nan("")}), DomainError);
}

TEST(Dichotomize, PositiveAmountsOnly) {
  EXPECT_EQ(dichotomize(0.01), 1);
  EXPECT_EQ(dichotomize(0.0), 0);
  EXPECT_EQ(dichotomize(std::nullopt), 0);
  EXPECT_THROW(dichotomize(-1.0), DomainError);
}

TEST(Logit, InterceptOnlyBalancedIsZero) {
  std::vector<std::string> ids;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    ids.push_back(std::to_string(i));
    y.push_back(i % 2);
  }
  const auto fit = fit_logit(DesignBuilder(ids, y).build());
  ASSERT_EQ(fit.coefficients.size(), 1u);
  EXPECT_NEAR(fit.coefficients[0].beta, 0.0, 1e-8);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.coefficients[0].se, 2.0 / std::sqrt(50.0), 1e-8);
}

TEST(Logit, MatchesDirectLikelihoodMaximization) {
  const auto d = simulate(400, 0.3, -0.7, 8);
  const auto fit = fit_logit(d);
  auto profile = [&](double b1) {
    return log_likelihood(d, golden_max([&](double b0) { return log_likelihood(d, b0, b1); }, -5, 5), b1);
  };
  const double b1 = golden_max(profile, -5, 5);
  const double b0 = golden_max([&](double v) { return log_likelihood(d, v, b1); }, -5, 5);
  EXPECT_NEAR(fit.at("(intercept)").beta, b0, 1e-4);
  EXPECT_NEAR(fit.at("x").beta, b1, 1e-4);
  EXPECT_NEAR(fit.log_likelihood, log_likelihood(d, b0, b1), 1e-6);
}

TEST(Logit, RecoversKnownCoefficients) {
  const auto fit = fit_logit(simulate(5000, -1.0, 0.8, 42));
  const auto& b0 = fit.at("(intercept)");
  const auto& b1 = fit.at("x");
  EXPECT_NEAR(b0.beta, -1.0, 0.1);
  EXPECT_NEAR(b1.beta, 0.8, 0.1);
  EXPECT_LE(b0.beta - 1.96 * b0.se, -1.0);
  EXPECT_GE(b0.beta + 1.96 * b0.se, -1.0);
  EXPECT_LE(b1.beta - 1.96 * b1.se, 0.8);
  EXPECT_GE(b1.beta + 1.96 * b1.se, 0.8);
  EXPECT_LT(b1.p, 0.001);
  EXPECT_EQ(b1.stars, "***");
}

TEST(Logit, SlopeTestInvariantToAffineRescaling) {
  const auto a = fit_logit(simulate(300, 0.2, 0.4, 3));
  const auto b = fit_logit(simulate(300, 0.2, 0.4, 3, 2.5, -7.0));
  EXPECT_NEAR(a.at("x").z, b.at("x").z, 1e-8);
  EXPECT_NEAR(a.at("x").p, b.at("x").p, 1e-8);
  EXPECT_NEAR(a.at("x").beta, 2.5 * b.at("x").beta, 1e-8);
}

TEST(Logit, FittedProbabilitiesInsideUnitInterval) {
  const auto d = simulate(200, 0.5, 1.5, 9);
  const auto fit = fit_logit(d);
  const auto p = fitted_probabilities(d, fit);
  EXPECT_GT(p.minCoeff(), 0.0);
  EXPECT_LT(p.maxCoeff(), 1.0);
  // Score equations: residuals sum to zero at the optimum.
  EXPECT_NEAR((d.y - p).sum(), 0.0, 1e-6);
}

TEST(Logit, StarsAndPValues) {
  EXPECT_NEAR(two_tailed_p(1.959963984540054), 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(two_tailed_p(0.0), 1.0);
  EXPECT_EQ(significance_stars(0.2), "");
  EXPECT_EQ(significance_stars(0.04), "*");
  EXPECT_EQ(significance_stars(0.009), "**");
  EXPECT_EQ(significance_stars(0.0009), "***");
  EXPECT_EQ(significance_stars(0.05), "");
}

TEST(Logit, PrunesDegenerateColumns) {
  auto base = simulate(100, 0, 1, 4);
  std::vector<double> x(base.rows()), zero(base.rows(), 0.0), twice(base.rows());
  for (size_t i = 0; i < x.size(); ++i) x[i] = base.x(static_cast<Eigen::Index>(i), 1);
  for (size_t i = 0; i < x.size(); ++i) twice[i] = 2 * x[i] + 1;
  std::vector<double> y(base.y.data(), base.y.data() + base.y.size());
  auto d = DesignBuilder(base.row_ids, y).add("x", x).add("empty", zero).add("twice", twice).build();
  const auto fit = fit_logit(d);
  EXPECT_EQ(fit.pruned.dropped, (std::vector<std::string>{"empty", "twice"}));
  EXPECT_EQ(fit.pruned.reasons[0], "all zero");
  EXPECT_EQ(fit.find("empty"), nullptr);
  EXPECT_NEAR(fit.at("x").beta, fit_logit(base).at("x").beta, 1e-10);
}

TEST(Logit, FlagsSeparation) {
  std::vector<std::string> ids;
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    ids.push_back(std::to_string(i));
    x.push_back(i);
    y.push_back(i >= 20 ? 1 : 0);
  }
  const auto fit = fit_logit(DesignBuilder(ids, y).add("x", x).build());
  EXPECT_TRUE(!fit.converged || !fit.diverging.empty());
  EXPECT_FALSE(fit.diverging.empty());
}

TEST(Logit, RejectsTooFewRows) {
  std::vector<std::string> ids = {"a", "b"};
  EXPECT_THROW(fit_logit(DesignBuilder(ids, {0, 1}).add("x", {0.5, 1.5}).build()), DomainError);
}

TEST(Design, CategoricalDummies) {
  std::vector<std::string> ids = {"a", "b", "c"};
  const auto d = DesignBuilder(ids, {0, 1, 1})
                     .add_categorical("Sex", {"Male", "Female", "Other"}, {"Male", "Female", "Other"}, "Female")
                     .build();
  EXPECT_EQ(d.columns, (std::vector<std::string>{"(intercept)", "Sex:Male", "Sex:Other"}));
  EXPECT_EQ(d.x(0, 1), 1.0);
  EXPECT_EQ(d.x(1, 1), 0.0);
  EXPECT_EQ(d.x(2, 2), 1.0);
}

TEST(Consistency, Classes) {
  EXPECT_EQ(classify_consistency(0.5, 0.0), Consistency::Zero);
  EXPECT_EQ(classify_consistency(0.5, 0.2), Consistency::Reduced);
  EXPECT_EQ(classify_consistency(0.5, 0.5), Consistency::Consistent);
  EXPECT_EQ(classify_consistency(0.5, 1.0), Consistency::Increased);
  EXPECT_EQ(classify_consistency(std::nullopt, 1.0), Consistency::Consistent);
  EXPECT_EQ(classify_consistency(std::nullopt, 0.0), Consistency::Zero);
}

TEST(Demographics, LevelMapping) {
  EXPECT_EQ(sex_level("female"), "Female");
  EXPECT_EQ(sex_level(""), "");
  EXPECT_EQ(education_level("Four-year degree"), "FourYear");
  EXPECT_EQ(education_level("Master's degree"), "Postgraduate");
  EXPECT_EQ(education_level("High school"), "LessThanFourYear");
  EXPECT_EQ(religion_level("Agnostic"), "Atheist");
  EXPECT_EQ(religion_level("Methodist"), "Protestant");
  EXPECT_EQ(ideology_level("Very liberal"), "Liberal");
  EXPECT_EQ(employment_level("Employed for wages"), "Employed");
}

TEST(Models, StrategyExposureCountsPersuaderSentences) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 3, .annotated = 3});
  const auto& d = corpus.dialogues()[0];
  const auto counts = strategy_exposure(d, false);
  double total = 0;
  size_t labeled = 0;
  for (double c : counts) total += c;
  for (const auto& t : d.turns)
    if (t.role == Role::Persuader)
      for (const auto& s : t.sentences)
        if (s.strategy() && *s.strategy() != StrategyLabel::NonStrategy) ++labeled;
  EXPECT_EQ(total, static_cast<double>(labeled));
  for (double c : strategy_exposure(d, true)) EXPECT_TRUE(c == 0.0 || c == 1.0);
}

TEST(Models, StrategyModelOnSyntheticCorpus) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 200, .annotated = 200});
  const auto design = strategy_design(corpus);
  EXPECT_EQ(design.rows(), 200u);
  EXPECT_EQ(design.cols(), 11u);
  EXPECT_EQ(design.columns[7], "donation-information");
  const auto fit = strategy_model(corpus);
  EXPECT_EQ(fit.n, 200u);
  EXPECT_NE(format_coefficients(fit.coefficients).find("donation-information"), std::string::npos);
  EXPECT_NE(coefficients_csv(fit.coefficients).find("predictor,coefficient,se,z,p,stars"), std::string::npos);
}

TEST(Models, DedupKeepsFirstTask) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 20, .annotated = 20, .repeat_workers = 3});
  EXPECT_EQ(persuadee_rows(corpus, {}).size(), 17u);
  EXPECT_EQ(persuadee_rows(corpus, {.dedup = false}).size(), 20u);
}

TEST(Models, ProfileModelFindsAgreeableness) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 600, .annotated = 0, .exchanges = 3});
  const auto pd = profile_design(corpus);
  EXPECT_EQ(pd.dropped_rows, 0u);
  EXPECT_TRUE(pd.design.column("Age"));
  EXPECT_LT(*pd.design.column("Income"), *pd.design.column("Religion:Catholic"));
  const auto fit = profile_model(corpus);
  EXPECT_GT(fit.at("agreeable").beta, 0.0);
  EXPECT_LT(fit.at("agreeable").p, 0.05);
}

TEST(Models, InteractionModelPerTrait) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 300, .annotated = 300, .exchanges = 4});
  const auto fits = interaction_model(corpus, TraitBlock::Decision);
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_EQ(fits[1].trait, "intuitive");
  EXPECT_EQ(fits[0].fit.coefficients.front().name, "(intercept)");
  for (const auto& c : fits[0].interactions) EXPECT_EQ(c.name.rfind("rationalx", 0), 0u);
  const auto d = interaction_design(corpus, "rational");
  EXPECT_EQ(d.cols(), 1u + 1 + 10 + 10);
  EXPECT_THROW(parse_trait_block("bigsix"), ConfigError);
}

TEST(Models, InconsistencySummary) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 300, .annotated = 300, .exchanges = 4});
  const auto r = inconsistency_model(corpus);
  const auto& s = r.summary;
  size_t agreed = 0, reduced = 0, zero = 0, increased = 0;
  for (const auto* p : persuadee_rows(corpus, {})) {
    if (!agreed_to_donate(*corpus.find_dialogue(p->dialogue_id), *p)) continue;
    ++agreed;
    const double a = p->donation_actual;
    if (a <= 0)
      ++zero;
    else if (a < *p->donation_promised)
      ++reduced;
    else if (a > *p->donation_promised)
      ++increased;
  }
  EXPECT_EQ(s.agreed, agreed);
  EXPECT_EQ(s.reduced, reduced);
  EXPECT_EQ(s.zero, zero);
  EXPECT_EQ(s.increased, increased);
  EXPECT_NEAR(s.pct_zero, 100.0 * zero / agreed, 1e-12);
  EXPECT_EQ(r.design.cols(), 6u);
}
