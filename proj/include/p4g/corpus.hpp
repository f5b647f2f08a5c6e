#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace p4g {

// The 10 persuasion strategies followed by the catch-all non-strategy class.
// Enum order doubles as the argmax tie-break order.
enum class StrategyLabel : uint8_t {
  LogicalAppeal,
  EmotionAppeal,
  CredibilityAppeal,
  FootInTheDoor,
  SelfModeling,
  PersonalStory,
  DonationInformation,
  SourceInquiry,
  TaskInquiry,
  PersonalInquiry,
  NonStrategy,
};

inline constexpr size_t kNumLabels = 11;
inline constexpr size_t kNumStrategies = 10;

constexpr bool is_appeal(StrategyLabel l) { return l <= StrategyLabel::DonationInformation; }
constexpr bool is_inquiry(StrategyLabel l) {
  return l >= StrategyLabel::SourceInquiry && l <= StrategyLabel::PersonalInquiry;
}
constexpr size_t index_of(StrategyLabel l) { return static_cast<size_t>(l); }
constexpr StrategyLabel label_at(size_t i) { return static_cast<StrategyLabel>(i); }

// Machine name ("credibility-appeal").
std::string_view key(StrategyLabel l);
// Human name ("Credibility appeal").
std::string_view display_name(StrategyLabel l);
// Accepts machine names, display names and the underscore/camel variants of
// the released annotation files. Anything else that is non-empty is a
// non-strategy persuader act.
StrategyLabel parse_strategy_label(std::string_view raw);
std::optional<StrategyLabel> parse_strategy_key(std::string_view raw);

enum class PersuadeeAct : uint8_t {
  AskOrgInfo,
  AskDonationProcedure,
  PositiveReaction,
  NeutralReaction,
  NegativeReaction,
  AgreeDonation,
  DisagreeDonation,
  PositiveToInquiry,
  NegativeToInquiry,
  Other,
};

std::string_view key(PersuadeeAct a);
PersuadeeAct parse_persuadee_act(std::string_view raw);

enum class Role : uint8_t { Persuader, Persuadee };

std::string_view key(Role r);
std::optional<Role> parse_role(std::string_view raw);

using SentenceLabel = std::variant<std::monostate, StrategyLabel, PersuadeeAct>;

struct Sentence {
  std::string dialogue_id;
  int turn_index = 0;
  int sentence_index = 0;
  Role role = Role::Persuader;
  std::string text;
  std::vector<std::string> tokens;
  SentenceLabel label;

  bool labeled() const { return !std::holds_alternative<std::monostate>(label); }
  std::optional<StrategyLabel> strategy() const {
    if (auto* s = std::get_if<StrategyLabel>(&label)) return *s;
    return std::nullopt;
  }
  std::optional<PersuadeeAct> act() const {
    if (auto* a = std::get_if<PersuadeeAct>(&label)) return *a;
    return std::nullopt;
  }

  bool operator==(const Sentence&) const = default;
};

// One utterance: the consecutive sentences a single role typed in a turn.
struct Turn {
  int index = 0;
  Role role = Role::Persuader;
  std::vector<Sentence> sentences;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::string persuader_id;
  std::string persuadee_id;
  bool annotated = false;

  bool operator==(const Dialogue&) const = default;
};

// Missing numeric survey answers are stored as NaN.
struct Demographics {
  double age;
  std::string sex;
  std::string race;
  std::string education;
  std::string marital;
  std::string employment;
  std::string religion;
  std::string ideology;
  double income;
};

inline constexpr std::array<std::string_view, 5> kBigFive = {
    "extrovert", "agreeable", "conscientious", "neurotic", "open"};
inline constexpr std::array<std::string_view, 6> kMoral = {
    "care", "fairness", "loyalty", "authority", "purity", "freedom"};
inline constexpr std::array<std::string_view, 10> kSchwartz = {
    "conform",        "tradition",   "benevolence", "universalism", "self_direction",
    "stimulation",    "hedonism",    "achievement", "power",        "security"};
inline constexpr std::array<std::string_view, 2> kDecision = {"rational", "intuitive"};
inline constexpr size_t kPsychDims = 23;

// One survey record. A worker who took the task twice has two of these.
struct ParticipantProfile {
  std::string worker_id;
  std::string dialogue_id;
  Role role = Role::Persuadee;
  Demographics demographics{};
  std::array<double, 5> big_five{};
  std::array<double, 6> moral{};
  std::array<double, 10> schwartz{};
  std::array<double, 2> decision{};
  std::optional<double> donation_promised;
  double donation_actual = 0.0;

  std::array<double, kPsychDims> psych_vector() const;
  // Looks up a trait by the names in kBigFive/kMoral/kSchwartz/kDecision.
  std::optional<double> trait(std::string_view name) const;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Dialogue> dialogues, std::vector<ParticipantProfile> profiles);

  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  const std::vector<ParticipantProfile>& profiles() const { return profiles_; }
  const std::set<std::string>& vocabulary() const { return vocabulary_; }

  const Dialogue* find_dialogue(std::string_view id) const;
  // Profile of the given role in the given dialogue, if any.
  const ParticipantProfile* profile_for(std::string_view dialogue_id, Role role) const;

  // Subset restricted to annotated dialogues and the profiles attached to them.
  Corpus annotated_subset() const;

 private:
  std::vector<Dialogue> dialogues_;
  std::vector<ParticipantProfile> profiles_;
  std::set<std::string> vocabulary_;
  std::map<std::string, size_t, std::less<>> dialogue_index_;
  std::map<std::pair<std::string, Role>, size_t, std::less<>> profile_index_;
};

// Canonical field name -> column header in the input file. Fields absent
// from the map resolve to themselves; a field mapped to "" is treated as
// not present (only allowed for optional fields).
class ColumnMap {
 public:
  ColumnMap() = default;
  static ColumnMap load(const std::string& path);
  static ColumnMap parse(std::string_view text);

  void set(std::string field, std::string column) { map_[std::move(field)] = std::move(column); }
  std::string resolve(std::string_view field) const;

 private:
  std::map<std::string, std::string, std::less<>> map_;
};

struct IngestOptions {
  double payment_cap = 2.00;
  // Throw ParseError on the first unparseable row instead of collecting.
  bool strict = false;
};

struct RowIssue {
  std::string file;
  size_t line = 0;
  std::string field;
  std::string message;
};

struct IngestResult {
  Corpus corpus;
  std::vector<RowIssue> errors;
  std::vector<std::string> warnings;
};

IngestResult ingest(const std::string& dialogue_file, const std::string& profile_file,
                    const ColumnMap& columns = {}, const IngestOptions& options = {});

// Writes the canonical two-file format that `ingest` reads with an empty map.
void serialize(const Corpus& corpus, const std::string& dialogue_file,
               const std::string& profile_file);

enum class DonationBasis { Actual, Promised };

bool donated(const ParticipantProfile& p, DonationBasis basis = DonationBasis::Actual);

struct CorpusStats {
  size_t dialogues = 0;
  size_t annotated = 0;
  size_t participants = 0;
  double mean_donation = 0.0;
  double mean_turns = 0.0;
  double mean_words_per_utterance = 0.0;
  std::array<double, 2> words_per_utterance{};  // indexed by Role
  size_t unique_tokens = 0;
  std::array<size_t, 2> donated{};
  std::array<size_t, 2> not_donated{};
};

CorpusStats corpus_stats(const Corpus& corpus, DonationBasis basis = DonationBasis::Actual);
std::string format_stats_table(const CorpusStats& s);
std::string format_stats_kv(const CorpusStats& s);

using StrategyCounts = std::array<size_t, kNumLabels>;

StrategyCounts strategy_counts(const Corpus& corpus);

// Index t counts occurrences at persuader turn t; the final bucket absorbs
// every later turn.
std::vector<size_t> turn_histogram(const Corpus& corpus, StrategyLabel label, int max_turn);

// Keeps the first record of every worker, in input order.
std::vector<ParticipantProfile> dedup_first_task(const std::vector<ParticipantProfile>& profiles);

struct TraitSplit {
  std::array<double, 5> mean_donated{};
  std::array<double, 5> mean_not_donated{};
  size_t n_donated = 0;
  size_t n_not_donated = 0;
};

// Big-Five group means over persuadee records, split by donation.
TraitSplit trait_means_by_donation(const Corpus& corpus,
                                   DonationBasis basis = DonationBasis::Actual);

}  // namespace p4g
