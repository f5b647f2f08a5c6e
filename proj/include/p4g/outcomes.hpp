#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "p4g/corpus.hpp"

namespace p4g {

// 1 iff the amount is positive; an absent amount counts as no donation.
int dichotomize(std::optional<double> amount);

// Population-sd z-scores. Throws DomainError for a constant or
// non-finite column.
std::vector<double> standardize(std::span<const double> column);

struct DesignMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> row_ids;
  Eigen::MatrixXd x;  // rows x columns
  Eigen::VectorXd y;  // 0/1

  size_t rows() const { return static_cast<size_t>(x.rows()); }
  size_t cols() const { return static_cast<size_t>(x.cols()); }
  std::optional<size_t> column(std::string_view name) const;
  void validate() const;
};

// Builds a design column by column. The intercept is added first.
class DesignBuilder {
 public:
  DesignBuilder(std::vector<std::string> row_ids, std::vector<double> outcome);

  DesignBuilder& add(std::string name, std::vector<double> values);
  // Dummy columns "<name>:<level>" for every level except `reference`, in
  // the order given.
  DesignBuilder& add_categorical(const std::string& name, const std::vector<std::string>& values,
                                 const std::vector<std::string>& levels,
                                 const std::string& reference);
  DesignMatrix build() const;

 private:
  std::vector<std::string> row_ids_;
  std::vector<double> outcome_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

struct PruneReport {
  std::vector<std::string> dropped;
  std::vector<std::string> reasons;
};

// Drops constant non-intercept columns, then every column that is a linear
// combination of the columns kept before it.
PruneReport prune_degenerate(DesignMatrix& design);

struct Coefficient {
  std::string name;
  double beta = 0;
  double se = 0;
  double z = 0;
  double p = 1;
  std::string stars;
};

struct GlmResult {
  std::vector<Coefficient> coefficients;
  double log_likelihood = 0;
  bool converged = false;
  size_t iterations = 0;
  size_t n = 0;
  PruneReport pruned;
  // Columns whose estimates run off when the data are separable.
  std::vector<std::string> diverging;

  const Coefficient* find(std::string_view name) const;
  const Coefficient& at(std::string_view name) const;
};

struct FitOptions {
  double tolerance = 1e-8;
  size_t max_iterations = 100;
  bool prune = true;
};

// Two-tailed normal p-value of a Wald statistic.
double two_tailed_p(double z);
// "*" < .05, "**" < .01, "***" < .001, otherwise empty.
std::string significance_stars(double p);

// Logistic regression by iteratively reweighted least squares.
GlmResult fit_logit(DesignMatrix design, const FitOptions& options = {});

Eigen::VectorXd fitted_probabilities(const DesignMatrix& design, const GlmResult& fit);

struct OutcomeOptions {
  // Strategy exposure as 0/1 presence instead of per-dialogue counts.
  bool presence = false;
  // Keep only the first task of workers who took part twice.
  bool dedup = true;
  DonationBasis basis = DonationBasis::Actual;
};

// Persuader sentences per strategy in one dialogue.
std::array<double, kNumStrategies> strategy_exposure(const Dialogue& d, bool presence);

// Persuadee records entering the outcome models: profiles attached to a
// dialogue present in the corpus, deduplicated per the options.
std::vector<const ParticipantProfile*> persuadee_rows(const Corpus& corpus,
                                                      const OutcomeOptions& options);

DesignMatrix strategy_design(const Corpus& corpus, const OutcomeOptions& options = {});
GlmResult strategy_model(const Corpus& corpus, const OutcomeOptions& options = {});

// Demographic categories collapsed to the reference coding of the profile
// model. Unrecognized or empty answers map to "".
std::string sex_level(std::string_view raw);
std::string race_level(std::string_view raw);
std::string education_level(std::string_view raw);
std::string marital_level(std::string_view raw);
std::string employment_level(std::string_view raw);
std::string religion_level(std::string_view raw);
std::string ideology_level(std::string_view raw);

struct ProfileDesign {
  DesignMatrix design;
  size_t dropped_rows = 0;  // missing answers
};

ProfileDesign profile_design(const Corpus& corpus, const OutcomeOptions& options = {});
GlmResult profile_model(const Corpus& corpus, const OutcomeOptions& options = {});

enum class TraitBlock { BigFive, Moral, Schwartz, Decision };

std::string_view key(TraitBlock b);
TraitBlock parse_trait_block(std::string_view s);
std::vector<std::string> trait_names(TraitBlock b);

struct InteractionFit {
  std::string trait;
  GlmResult fit;
  // Rows "<trait>x<strategy>" in strategy order; pruned ones are skipped.
  std::vector<Coefficient> interactions;
};

DesignMatrix interaction_design(const Corpus& corpus, std::string_view trait,
                                const OutcomeOptions& options = {});
std::vector<InteractionFit> interaction_model(const Corpus& corpus, TraitBlock block,
                                              const OutcomeOptions& options = {});

enum class Consistency { Consistent, Reduced, Zero, Increased };

// Reduced: 0 < actual < promised. Zero: nothing donated. Increased:
// actual > promised. Without a promised amount only Zero/Consistent apply.
Consistency classify_consistency(std::optional<double> promised, double actual);

// Agreement comes from an agree-donation persuadee act; dialogues without
// any persuadee act labels fall back to a positive promised amount.
bool agreed_to_donate(const Dialogue& d, const ParticipantProfile& persuadee);

struct InconsistencySummary {
  size_t agreed = 0;
  size_t reduced = 0;
  size_t zero = 0;
  size_t increased = 0;
  double pct_reduced = 0;
  double pct_zero = 0;
  double pct_increased = 0;
};

struct InconsistencyResult {
  InconsistencySummary summary;
  DesignMatrix design;
  GlmResult fit;
};

// Outcome 1 for Reduced or Zero; predictors are the five standardized
// Big-Five traits.
InconsistencyResult inconsistency_model(const Corpus& corpus, const OutcomeOptions& options = {});

// Aligned predictor / coefficient+stars table.
std::string format_coefficients(const std::vector<Coefficient>& rows, bool with_intercept = true);
std::string coefficients_csv(const std::vector<Coefficient>& rows);

}  // namespace p4g
