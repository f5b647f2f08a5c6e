#include "p4g/outcomes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "p4g/csv.hpp"
#include "p4g/error.hpp"
#include "p4g/text.hpp"

namespace p4g {

namespace {

constexpr const char* kIntercept = "(intercept)";

bool contains(std::string_view s, std::string_view part) { return s.find(part) != std::string_view::npos; }

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double mu = sigmoid(eta[i]);
    w[i] = mu * (1.0 - mu);
  }
  return x.transpose() * w.asDiagonal() * x;
}

std::string strategy_column(size_t s) { return std::string(key(label_at(s))); }

std::vector<double> column_of(const std::vector<std::array<double, kNumStrategies>>& rows, size_t s) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[s]);
  return out;
}

}  // namespace

int dichotomize(std::optional<double> amount) {
  if (!amount) return 0;
  if (!(*amount >= 0)) throw DomainError("donation amount must be >= 0");
  return *amount > 0 ? 1 : 0;
}

std::vector<double> standardize(std::span<const double> column) {
  if (column.size() < 2) throw DomainError("standardize: need at least two values");
  double mean = 0;
  for (double v : column) {
    if (!std::isfinite(v)) throw DomainError("standardize: non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(column.size());
  double var = 0;
  for (double v : column) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(column.size()));
  if (!(sd > 1e-12 * (1.0 + std::fabs(mean)))) throw DomainError("standardize: constant column");
  std::vector<double> out;
  out.reserve(column.size());
  for (double v : column) out.push_back((v - mean) / sd);
  return out;
}

std::optional<size_t> DesignMatrix::column(std::string_view name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

void DesignMatrix::validate() const {
  if (static_cast<size_t>(x.cols()) != columns.size()) throw DomainError("design: column names do not match matrix");
  if (x.rows() != y.size()) throw DomainError("design: outcome length does not match rows");
  if (!row_ids.empty() && row_ids.size() != rows()) throw DomainError("design: row ids do not match rows");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw DomainError("design: outcome must be 0 or 1");
  if (!x.allFinite()) throw DomainError("design: non-finite predictor value");
}

DesignBuilder::DesignBuilder(std::vector<std::string> row_ids, std::vector<double> outcome)
    : row_ids_(std::move(row_ids)), outcome_(std::move(outcome)) {
  if (row_ids_.size() != outcome_.size()) throw DomainError("design: row ids do not match outcome");
  add(kIntercept, std::vector<double>(outcome_.size(), 1.0));
}

DesignBuilder& DesignBuilder::add(std::string name, std::vector<double> values) {
  if (values.size() != outcome_.size())
    throw DomainError("design: column " + name + " has " + std::to_string(values.size()) + " rows, expected " +
                      std::to_string(outcome_.size()));
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
  return *this;
}

DesignBuilder& DesignBuilder::add_categorical(const std::string& name, const std::vector<std::string>& values,
                                              const std::vector<std::string>& levels,
                                              const std::string& reference) {
  if (std::find(levels.begin(), levels.end(), reference) == levels.end())
    throw DomainError("design: reference level " + reference + " not among levels of " + name);
  for (const auto& v : values)
    if (std::find(levels.begin(), levels.end(), v) == levels.end())
      throw DomainError("design: unknown level '" + v + "' for " + name);
  for (const auto& level : levels) {
    if (level == reference) continue;
    std::vector<double> col;
    col.reserve(values.size());
    for (const auto& v : values) col.push_back(v == level ? 1.0 : 0.0);
    add(name + ":" + level, std::move(col));
  }
  return *this;
}

DesignMatrix DesignBuilder::build() const {
  DesignMatrix d;
  d.columns = names_;
  d.row_ids = row_ids_;
  d.x.resize(static_cast<Eigen::Index>(outcome_.size()), static_cast<Eigen::Index>(names_.size()));
  for (size_t j = 0; j < columns_.size(); ++j)
    for (size_t i = 0; i < outcome_.size(); ++i)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns_[j][i];
  d.y = Eigen::Map<const Eigen::VectorXd>(outcome_.data(), static_cast<Eigen::Index>(outcome_.size()));
  return d;
}

PruneReport prune_degenerate(DesignMatrix& design) {
  PruneReport report;
  std::vector<Eigen::Index> keep;
  Eigen::MatrixXd kept(design.x.rows(), 0);
  Eigen::Index rank = 0;
  for (size_t j = 0; j < design.cols(); ++j) {
    const auto col = design.x.col(static_cast<Eigen::Index>(j));
    if (design.columns[j] != kIntercept && design.rows() > 0 && col.maxCoeff() - col.minCoeff() < 1e-12) {
      report.dropped.push_back(design.columns[j]);
      report.reasons.push_back(col.cwiseAbs().maxCoeff() == 0 ? "all zero" : "constant");
      continue;
    }
    Eigen::MatrixXd trial(kept.rows(), kept.cols() + 1);
    trial << kept, col;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() <= rank) {
      report.dropped.push_back(design.columns[j]);
      report.reasons.push_back("collinear with earlier columns");
      continue;
    }
    rank = qr.rank();
    kept = std::move(trial);
    keep.push_back(static_cast<Eigen::Index>(j));
  }
  if (!report.dropped.empty()) {
    std::vector<std::string> names;
    for (auto j : keep) names.push_back(design.columns[static_cast<size_t>(j)]);
    design.columns = std::move(names);
    design.x = std::move(kept);
  }
  return report;
}

const Coefficient* GlmResult::find(std::string_view name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return &c;
  return nullptr;
}

const Coefficient& GlmResult::at(std::string_view name) const {
  if (auto* c = find(name)) return *c;
  throw DomainError("no coefficient named " + std::string(name));
}

double two_tailed_p(double z) {
  if (std::isnan(z)) return 1.0;
  return std::clamp(std::erfc(std::fabs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

GlmResult fit_logit(DesignMatrix design, const FitOptions& options) {
  design.validate();
  GlmResult result;
  if (options.prune) result.pruned = prune_degenerate(design);
  const auto n = design.x.rows();
  const auto p = design.x.cols();
  if (p == 0) throw DomainError("fit_logit: no columns");
  if (n <= p)
    throw DomainError("fit_logit: " + std::to_string(n) + " rows for " + std::to_string(p) + " columns");
  result.n = static_cast<size_t>(n);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = log_likelihood(design.x, design.y, beta);
  for (size_t it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    const Eigen::VectorXd eta = design.x * beta;
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid[i] = design.y[i] - sigmoid(eta[i]);
    const Eigen::MatrixXd info = information(design.x, beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) break;
    Eigen::VectorXd step = ldlt.solve(design.x.transpose() * resid);
    if (!step.allFinite()) break;
    // Step halving keeps the likelihood from decreasing.
    Eigen::VectorXd next = beta + step;
    double ll_next = log_likelihood(design.x, design.y, next);
    for (int h = 0; h < 30 && !(ll_next >= ll - 1e-12); ++h) {
      step *= 0.5;
      next = beta + step;
      ll_next = log_likelihood(design.x, design.y, next);
    }
    beta = next;
    ll = ll_next;
    if (step.cwiseAbs().maxCoeff() < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.log_likelihood = ll;

  const Eigen::MatrixXd info = information(design.x, beta);
  Eigen::VectorXd se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) {
    const Eigen::MatrixXd cov = lu.inverse();
    for (Eigen::Index j = 0; j < p; ++j) se[j] = cov(j, j) > 0 ? std::sqrt(cov(j, j)) : std::numeric_limits<double>::infinity();
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    Coefficient c;
    c.name = design.columns[static_cast<size_t>(j)];
    c.beta = beta[j];
    c.se = se[j];
    c.z = std::isfinite(se[j]) ? beta[j] / se[j] : 0.0;
    c.p = two_tailed_p(c.z);
    c.stars = significance_stars(c.p);
    result.coefficients.push_back(std::move(c));
  }

  if (!result.converged) {
    const double largest = beta.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < p; ++j)
      if (std::fabs(beta[j]) >= std::max(5.0, 0.5 * largest))
        result.diverging.push_back(design.columns[static_cast<size_t>(j)]);
  }
  return result;
}

Eigen::VectorXd fitted_probabilities(const DesignMatrix& design, const GlmResult& fit) {
  Eigen::VectorXd beta(static_cast<Eigen::Index>(fit.coefficients.size()));
  Eigen::MatrixXd x(design.x.rows(), beta.size());
  for (size_t j = 0; j < fit.coefficients.size(); ++j) {
    auto col = design.column(fit.coefficients[j].name);
    if (!col) throw DomainError("design lacks column " + fit.coefficients[j].name);
    beta[static_cast<Eigen::Index>(j)] = fit.coefficients[j].beta;
    x.col(static_cast<Eigen::Index>(j)) = design.x.col(static_cast<Eigen::Index>(*col));
  }
  Eigen::VectorXd eta = x * beta;
  return eta.unaryExpr([](double v) { return sigmoid(v); });
}

std::array<double, kNumStrategies> strategy_exposure(const Dialogue& d, bool presence) {
  std::array<double, kNumStrategies> out{};
  for (const auto& t : d.turns) {
    if (t.role != Role::Persuader) continue;
    for (const auto& s : t.sentences) {
      auto label = s.strategy();
      if (!label || *label == StrategyLabel::NonStrategy) continue;
      out[index_of(*label)] += 1.0;
    }
  }
  if (presence)
    for (auto& v : out) v = v > 0 ? 1.0 : 0.0;
  return out;
}

std::vector<const ParticipantProfile*> persuadee_rows(const Corpus& corpus, const OutcomeOptions& options) {
  std::vector<const ParticipantProfile*> out;
  std::set<std::string> seen;
  for (const auto& p : corpus.profiles()) {
    if (p.role != Role::Persuadee || !corpus.find_dialogue(p.dialogue_id)) continue;
    if (options.dedup && !seen.insert(p.worker_id).second) continue;
    out.push_back(&p);
  }
  return out;
}

namespace {

int outcome_of(const ParticipantProfile& p, DonationBasis basis) {
  return dichotomize(basis == DonationBasis::Promised ? p.donation_promised
                                                      : std::optional<double>(p.donation_actual));
}

struct StrategyRows {
  std::vector<std::string> ids;
  std::vector<double> y;
  std::vector<std::array<double, kNumStrategies>> exposure;
  std::vector<const ParticipantProfile*> profiles;
};

StrategyRows strategy_rows(const Corpus& corpus, const OutcomeOptions& options) {
  StrategyRows rows;
  for (const auto* p : persuadee_rows(corpus, options)) {
    const Dialogue* d = corpus.find_dialogue(p->dialogue_id);
    rows.ids.push_back(p->dialogue_id);
    rows.y.push_back(outcome_of(*p, options.basis));
    rows.exposure.push_back(strategy_exposure(*d, options.presence));
    rows.profiles.push_back(p);
  }
  if (rows.ids.empty()) throw EmptyInputError("no persuadee records linked to dialogues");
  return rows;
}

}  // namespace

DesignMatrix strategy_design(const Corpus& corpus, const OutcomeOptions& options) {
  auto rows = strategy_rows(corpus, options);
  DesignBuilder b(rows.ids, rows.y);
  for (size_t s = 0; s < kNumStrategies; ++s) b.add(strategy_column(s), column_of(rows.exposure, s));
  return b.build();
}

GlmResult strategy_model(const Corpus& corpus, const OutcomeOptions& options) {
  return fit_logit(strategy_design(corpus, options));
}

std::string sex_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  if (s == "male" || s == "m" || s == "man") return "Male";
  if (s == "female" || s == "f" || s == "woman") return "Female";
  return "Other";
}

std::string race_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  if (contains(s, "white") && !contains(s, ",") && !contains(s, ";")) return "White";
  return "Other";
}

std::string education_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  for (auto k : {"postgrad", "master", "doctor", "phd", "professional degree"})
    if (contains(s, k)) return "Postgraduate";
  for (auto k : {"four", "4-year", "4 year", "bachelor"})
    if (contains(s, k)) return "FourYear";
  return "LessThanFourYear";
}

std::string marital_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  return s.starts_with("married") ? "Married" : "Unmarried";
}

std::string employment_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  if (s.starts_with("employed") || contains(s, "self-employed") || contains(s, "full-time") ||
      contains(s, "part-time") || contains(s, "full time") || contains(s, "part time"))
    return "Employed";
  return "Other";
}

std::string religion_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  for (auto k : {"atheist", "agnostic", "nothing in particular", "no religion", "none"})
    if (contains(s, k)) return "Atheist";
  if (contains(s, "catholic")) return "Catholic";
  for (auto k : {"protestant", "baptist", "methodist", "lutheran", "evangelical", "presbyterian"})
    if (contains(s, k)) return "Protestant";
  return "OtherReligion";
}

std::string ideology_level(std::string_view raw) {
  const auto s = to_lower(trim(raw));
  if (s.empty()) return "";
  if (contains(s, "liberal") || contains(s, "progressive")) return "Liberal";
  if (contains(s, "conservative")) return "Conservative";
  return "Moderate";
}

namespace {

struct Categorical {
  const char* name;
  std::string (*level)(std::string_view);
  std::string Demographics::*field;
  std::vector<std::string> levels;
  const char* reference;
};

const std::vector<Categorical>& categoricals() {
  static const std::vector<Categorical> c = {
      {"Sex", sex_level, &Demographics::sex, {"Male", "Female", "Other"}, "Female"},
      {"Race", race_level, &Demographics::race, {"White", "Other"}, "White"},
      {"Education", education_level, &Demographics::education,
       {"LessThanFourYear", "FourYear", "Postgraduate"}, "FourYear"},
      {"Marital", marital_level, &Demographics::marital, {"Married", "Unmarried"}, "Married"},
      {"Employment", employment_level, &Demographics::employment, {"Employed", "Other"}, "Employed"},
      {"Religion", religion_level, &Demographics::religion,
       {"Atheist", "Catholic", "OtherReligion", "Protestant"}, "Atheist"},
      {"Ideology", ideology_level, &Demographics::ideology, {"Liberal", "Moderate", "Conservative"},
       "Conservative"},
  };
  return c;
}

std::vector<std::string> psych_names() {
  std::vector<std::string> out;
  for (auto n : kBigFive) out.emplace_back(n);
  for (auto n : kMoral) out.emplace_back(n);
  for (auto n : kSchwartz) out.emplace_back(n);
  for (auto n : kDecision) out.emplace_back(n);
  return out;
}

}  // namespace

ProfileDesign profile_design(const Corpus& corpus, const OutcomeOptions& options) {
  const auto rows = persuadee_rows(corpus, options);
  if (rows.empty()) throw EmptyInputError("no persuadee records linked to dialogues");

  // Predictors nobody answered are left out rather than emptying the design.
  const bool have_age = std::any_of(rows.begin(), rows.end(), [](auto* p) { return !std::isnan(p->demographics.age); });
  const bool have_income =
      std::any_of(rows.begin(), rows.end(), [](auto* p) { return !std::isnan(p->demographics.income); });
  std::vector<const Categorical*> cats;
  for (const auto& c : categoricals())
    if (std::any_of(rows.begin(), rows.end(), [&](auto* p) { return !c.level(p->demographics.*c.field).empty(); }))
      cats.push_back(&c);
  std::vector<std::string> traits;
  for (const auto& t : psych_names())
    if (std::any_of(rows.begin(), rows.end(), [&](auto* p) { return !std::isnan(*p->trait(t)); }))
      traits.push_back(t);

  std::vector<const ParticipantProfile*> kept;
  for (const auto* p : rows) {
    bool ok = (!have_age || !std::isnan(p->demographics.age)) && (!have_income || !std::isnan(p->demographics.income));
    for (const auto* c : cats) ok = ok && !c->level(p->demographics.*c->field).empty();
    for (const auto& t : traits) ok = ok && !std::isnan(*p->trait(t));
    if (ok) kept.push_back(p);
  }
  ProfileDesign out;
  out.dropped_rows = rows.size() - kept.size();
  if (kept.empty()) throw EmptyInputError("no persuadee record has a complete survey");

  std::vector<std::string> ids;
  std::vector<double> y;
  for (const auto* p : kept) {
    ids.push_back(p->dialogue_id);
    y.push_back(outcome_of(*p, options.basis));
  }
  DesignBuilder b(ids, y);
  auto numeric = [&](auto get) {
    std::vector<double> v;
    for (const auto* p : kept) v.push_back(get(*p));
    return v;
  };
  if (have_age) b.add("Age", numeric([](const ParticipantProfile& p) { return p.demographics.age; }));
  for (const auto* c : cats) {
    if (c->name == std::string_view("Religion") && have_income)
      b.add("Income", numeric([](const ParticipantProfile& p) { return p.demographics.income; }));
    std::vector<std::string> levels;
    for (const auto* p : kept) levels.push_back(c->level(p->demographics.*c->field));
    b.add_categorical(c->name, levels, c->levels, c->reference);
  }
  if (have_income && std::none_of(cats.begin(), cats.end(), [](auto* c) { return c->name == std::string_view("Religion"); }))
    b.add("Income", numeric([](const ParticipantProfile& p) { return p.demographics.income; }));
  for (const auto& t : traits) {
    const auto raw = numeric([&](const ParticipantProfile& p) { return *p.trait(t); });
    std::vector<double> z;
    try {
      z = standardize(raw);
    } catch (const DomainError&) {
      z = std::vector<double>(raw.size(), 0.0);  // pruned as constant
    }
    b.add(t, std::move(z));
  }
  out.design = b.build();
  return out;
}

GlmResult profile_model(const Corpus& corpus, const OutcomeOptions& options) {
  return fit_logit(profile_design(corpus, options).design);
}

std::string_view key(TraitBlock b) {
  switch (b) {
    case TraitBlock::BigFive: return "big5";
    case TraitBlock::Moral: return "moral";
    case TraitBlock::Schwartz: return "schwartz";
    case TraitBlock::Decision: return "decision";
  }
  return "";
}

TraitBlock parse_trait_block(std::string_view s) {
  for (auto b : {TraitBlock::BigFive, TraitBlock::Moral, TraitBlock::Schwartz, TraitBlock::Decision})
    if (s == key(b)) return b;
  throw ConfigError("unknown trait block '" + std::string(s) + "' (big5, moral, schwartz, decision)");
}

std::vector<std::string> trait_names(TraitBlock b) {
  std::vector<std::string> out;
  auto push = [&](const auto& names) {
    for (auto n : names) out.emplace_back(n);
  };
  switch (b) {
    case TraitBlock::BigFive: push(kBigFive); break;
    case TraitBlock::Moral: push(kMoral); break;
    case TraitBlock::Schwartz: push(kSchwartz); break;
    case TraitBlock::Decision: push(kDecision); break;
  }
  return out;
}

DesignMatrix interaction_design(const Corpus& corpus, std::string_view trait, const OutcomeOptions& options) {
  auto rows = strategy_rows(corpus, options);
  std::vector<std::string> ids;
  std::vector<double> y, raw;
  std::vector<std::array<double, kNumStrategies>> exposure;
  for (size_t i = 0; i < rows.ids.size(); ++i) {
    auto v = rows.profiles[i]->trait(trait);
    if (!v) throw ConfigError("unknown trait '" + std::string(trait) + "'");
    if (std::isnan(*v)) continue;
    ids.push_back(rows.ids[i]);
    y.push_back(rows.y[i]);
    raw.push_back(*v);
    exposure.push_back(rows.exposure[i]);
  }
  if (ids.empty()) throw EmptyInputError("no persuadee record has a value for " + std::string(trait));
  const auto z = standardize(raw);
  DesignBuilder b(ids, y);
  b.add(std::string(trait), z);
  for (size_t s = 0; s < kNumStrategies; ++s) b.add(strategy_column(s), column_of(exposure, s));
  for (size_t s = 0; s < kNumStrategies; ++s) {
    std::vector<double> prod;
    for (size_t i = 0; i < z.size(); ++i) prod.push_back(z[i] * exposure[i][s]);
    b.add(std::string(trait) + "x" + strategy_column(s), std::move(prod));
  }
  return b.build();
}

std::vector<InteractionFit> interaction_model(const Corpus& corpus, TraitBlock block, const OutcomeOptions& options) {
  std::vector<InteractionFit> out;
  for (const auto& t : trait_names(block)) {
    InteractionFit f;
    f.trait = t;
    f.fit = fit_logit(interaction_design(corpus, t, options));
    for (size_t s = 0; s < kNumStrategies; ++s)
      if (auto* c = f.fit.find(t + "x" + strategy_column(s))) f.interactions.push_back(*c);
    out.push_back(std::move(f));
  }
  return out;
}

Consistency classify_consistency(std::optional<double> promised, double actual) {
  if (actual <= 0) return Consistency::Zero;
  if (!promised) return Consistency::Consistent;
  if (actual < *promised) return Consistency::Reduced;
  if (actual > *promised) return Consistency::Increased;
  return Consistency::Consistent;
}

bool agreed_to_donate(const Dialogue& d, const ParticipantProfile& persuadee) {
  bool any_act = false;
  for (const auto& t : d.turns) {
    if (t.role != Role::Persuadee) continue;
    for (const auto& s : t.sentences) {
      auto a = s.act();
      if (!a) continue;
      any_act = true;
      if (*a == PersuadeeAct::AgreeDonation) return true;
    }
  }
  return !any_act && persuadee.donation_promised.value_or(0.0) > 0.0;
}

InconsistencyResult inconsistency_model(const Corpus& corpus, const OutcomeOptions& options) {
  InconsistencyResult out;
  std::vector<std::string> ids;
  std::vector<double> y;
  std::array<std::vector<double>, 5> traits;
  for (const auto* p : persuadee_rows(corpus, options)) {
    const Dialogue* d = corpus.find_dialogue(p->dialogue_id);
    if (!agreed_to_donate(*d, *p)) continue;
    auto& s = out.summary;
    ++s.agreed;
    const auto c = classify_consistency(p->donation_promised, p->donation_actual);
    if (c == Consistency::Reduced) ++s.reduced;
    if (c == Consistency::Zero) ++s.zero;
    if (c == Consistency::Increased) ++s.increased;
    if (std::any_of(p->big_five.begin(), p->big_five.end(), [](double v) { return std::isnan(v); })) continue;
    ids.push_back(p->dialogue_id);
    y.push_back(c == Consistency::Reduced || c == Consistency::Zero ? 1.0 : 0.0);
    for (size_t k = 0; k < 5; ++k) traits[k].push_back(p->big_five[k]);
  }
  auto& s = out.summary;
  if (s.agreed == 0) throw EmptyInputError("no persuadee agreed to donate");
  const double base = static_cast<double>(s.agreed);
  s.pct_reduced = 100.0 * static_cast<double>(s.reduced) / base;
  s.pct_zero = 100.0 * static_cast<double>(s.zero) / base;
  s.pct_increased = 100.0 * static_cast<double>(s.increased) / base;
  if (ids.empty()) throw EmptyInputError("no agreeing persuadee has Big-Five scores");
  DesignBuilder b(ids, y);
  for (size_t k = 0; k < 5; ++k) b.add(std::string(kBigFive[k]), standardize(traits[k]));
  out.design = b.build();
  out.fit = fit_logit(out.design);
  return out;
}

std::string format_coefficients(const std::vector<Coefficient>& rows, bool with_intercept) {
  size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  char buf[64];
  out << "Predictor" << std::string(width - 9 + 2, ' ') << "Coefficient\n";
  for (const auto& r : rows) {
    if (!with_intercept && r.name == kIntercept) continue;
    std::snprintf(buf, sizeof buf, "%.2f%s", r.beta, r.stars.c_str());
    out << r.name << std::string(width - r.name.size() + 2, ' ') << buf << "\n";
  }
  return out.str();
}

std::string coefficients_csv(const std::vector<Coefficient>& rows) {
  std::ostringstream out;
  csv::write_row(out, {"predictor", "coefficient", "se", "z", "p", "stars"});
  char buf[4][32];
  for (const auto& r : rows) {
    std::snprintf(buf[0], 32, "%.6f", r.beta);
    std::snprintf(buf[1], 32, "%.6f", r.se);
    std::snprintf(buf[2], 32, "%.4f", r.z);
    std::snprintf(buf[3], 32, "%.6g", r.p);
    csv::write_row(out, {r.name, buf[0], buf[1], buf[2], buf[3], r.stars});
  }
  return out.str();
}

}  // namespace p4g
