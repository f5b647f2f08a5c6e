#include "p4g/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "p4g/csv.hpp"
#include "p4g/error.hpp"
#include "p4g/text.hpp"

namespace p4g {

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelKeys = {
    "logical-appeal",         "emotion-appeal",         "credibility-appeal",
    "foot-in-the-door",       "self-modeling",          "personal-story",
    "donation-information",   "source-related-inquiry", "task-related-inquiry",
    "personal-related-inquiry", "non-strategy"};

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "Logical appeal",         "Emotion appeal",         "Credibility appeal",
    "Foot-in-the-door",       "Self-modeling",          "Personal story",
    "Donation information",   "Source-related inquiry", "Task-related inquiry",
    "Personal-related inquiry", "Non-strategy"};

constexpr std::array<std::string_view, 10> kActKeys = {
    "ask-org-info",      "ask-donation-procedure", "positive-reaction-to-donation",
    "neutral-reaction-to-donation", "negative-reaction-to-donation", "agree-donation",
    "disagree-donation", "positive-to-inquiry",    "negative-to-inquiry",
    "other"};

// "Credibility_appeal", "credibility appeal", "CredibilityAppeal" -> "credibility-appeal"
std::string normalize_key(std::string_view raw) {
  std::string t = trim(raw);
  std::string out;
  for (size_t i = 0; i < t.size(); ++i) {
    const auto c = static_cast<unsigned char>(t[i]);
    if (c == '_' || c == ' ' || c == '-') {
      if (!out.empty() && out.back() != '-') out.push_back('-');
    } else if (std::isupper(c)) {
      if (i > 0 && std::islower(static_cast<unsigned char>(t[i - 1])) && out.back() != '-')
        out.push_back('-');
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

double parse_number(std::string_view raw, bool& ok) {
  std::string t = trim(raw);
  ok = true;
  if (t.empty() || t == "NA" || t == "na" || t == "NaN" || t == "nan" || t == "N/A")
    return std::numeric_limits<double>::quiet_NaN();
  if (!t.empty() && t.front() == '$') t.erase(0, 1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    ok = false;
    return 0;
  }
  return v;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Resolves canonical fields against a header, collecting missing required ones.
struct FieldIndex {
  const csv::Table& table;
  const ColumnMap& columns;
  std::string file;
  std::vector<std::string> missing;

  std::optional<size_t> get(std::string_view field, bool required) {
    const std::string col = columns.resolve(field);
    if (col.empty()) {
      if (required) missing.push_back(std::string(field) + " (mapped to nothing)");
      return std::nullopt;
    }
    auto idx = table.column(col);
    // One map serves both files; a file that keeps the canonical header still resolves.
    if (!idx && col != field) idx = table.column(field);
    if (!idx && required) missing.push_back(std::string(field) + " -> '" + col + "'");
    return idx;
  }

  void check() const {
    if (missing.empty()) return;
    std::string msg = file + ": missing required column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
};

std::string cell(const csv::Row& row, std::optional<size_t> idx) {
  if (!idx || *idx >= row.size()) return {};
  return row[*idx];
}

std::vector<std::string> profile_numeric_fields() {
  std::vector<std::string> f{"age", "income"};
  for (auto n : kBigFive) f.emplace_back(n);
  for (auto n : kMoral) f.emplace_back(n);
  for (auto n : kSchwartz) f.emplace_back(n);
  for (auto n : kDecision) f.emplace_back(n);
  return f;
}

constexpr std::array<std::string_view, 7> kCategoricalFields = {
    "sex", "race", "education", "marital", "employment", "religion", "ideology"};

std::string* categorical_slot(Demographics& d, std::string_view name) {
  if (name == "sex") return &d.sex;
  if (name == "race") return &d.race;
  if (name == "education") return &d.education;
  if (name == "marital") return &d.marital;
  if (name == "employment") return &d.employment;
  if (name == "religion") return &d.religion;
  if (name == "ideology") return &d.ideology;
  return nullptr;
}

double* numeric_slot(ParticipantProfile& p, std::string_view name) {
  if (name == "age") return &p.demographics.age;
  if (name == "income") return &p.demographics.income;
  for (size_t i = 0; i < kBigFive.size(); ++i)
    if (name == kBigFive[i]) return &p.big_five[i];
  for (size_t i = 0; i < kMoral.size(); ++i)
    if (name == kMoral[i]) return &p.moral[i];
  for (size_t i = 0; i < kSchwartz.size(); ++i)
    if (name == kSchwartz[i]) return &p.schwartz[i];
  for (size_t i = 0; i < kDecision.size(); ++i)
    if (name == kDecision[i]) return &p.decision[i];
  return nullptr;
}

std::vector<csv::Row> read_all(const std::string& path, csv::Row& header,
                               std::vector<size_t>& lines) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  csv::Reader reader(in);
  if (!reader.next(header)) throw SchemaError(path + ": empty file (no header)");
  for (auto& h : header) h = trim(h);
  std::vector<csv::Row> rows;
  csv::Row row;
  while (reader.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    rows.push_back(row);
    lines.push_back(reader.line());
  }
  return rows;
}

}  // namespace

std::string_view key(StrategyLabel l) { return kLabelKeys[index_of(l)]; }
std::string_view display_name(StrategyLabel l) { return kLabelNames[index_of(l)]; }

std::optional<StrategyLabel> parse_strategy_key(std::string_view raw) {
  const std::string k = normalize_key(raw);
  for (size_t i = 0; i < kNumLabels; ++i)
    if (k == kLabelKeys[i] || k == normalize_key(kLabelNames[i])) return label_at(i);
  if (k == "source-inquiry") return StrategyLabel::SourceInquiry;
  if (k == "task-inquiry") return StrategyLabel::TaskInquiry;
  if (k == "personal-inquiry") return StrategyLabel::PersonalInquiry;
  if (k == "non-strategy-dialogue-acts" || k == "nonstrategy") return StrategyLabel::NonStrategy;
  return std::nullopt;
}

StrategyLabel parse_strategy_label(std::string_view raw) {
  return parse_strategy_key(raw).value_or(StrategyLabel::NonStrategy);
}

std::string_view key(PersuadeeAct a) { return kActKeys[static_cast<size_t>(a)]; }

PersuadeeAct parse_persuadee_act(std::string_view raw) {
  const std::string k = normalize_key(raw);
  for (size_t i = 0; i < kActKeys.size(); ++i)
    if (k == kActKeys[i]) return static_cast<PersuadeeAct>(i);
  if (k == "positive-reaction") return PersuadeeAct::PositiveReaction;
  if (k == "neutral-reaction") return PersuadeeAct::NeutralReaction;
  if (k == "negative-reaction") return PersuadeeAct::NegativeReaction;
  if (k == "agree-to-donate") return PersuadeeAct::AgreeDonation;
  if (k == "disagree-to-donate" || k == "decline-donation") return PersuadeeAct::DisagreeDonation;
  return PersuadeeAct::Other;
}

std::string_view key(Role r) { return r == Role::Persuader ? "persuader" : "persuadee"; }

std::optional<Role> parse_role(std::string_view raw) {
  const std::string k = to_lower(trim(raw));
  if (k == "persuader" || k == "er" || k == "0") return Role::Persuader;
  if (k == "persuadee" || k == "ee" || k == "1") return Role::Persuadee;
  return std::nullopt;
}

std::array<double, kPsychDims> ParticipantProfile::psych_vector() const {
  std::array<double, kPsychDims> v{};
  auto it = std::copy(big_five.begin(), big_five.end(), v.begin());
  it = std::copy(moral.begin(), moral.end(), it);
  it = std::copy(schwartz.begin(), schwartz.end(), it);
  std::copy(decision.begin(), decision.end(), it);
  return v;
}

std::optional<double> ParticipantProfile::trait(std::string_view name) const {
  for (size_t i = 0; i < kBigFive.size(); ++i)
    if (name == kBigFive[i]) return big_five[i];
  for (size_t i = 0; i < kMoral.size(); ++i)
    if (name == kMoral[i]) return moral[i];
  for (size_t i = 0; i < kSchwartz.size(); ++i)
    if (name == kSchwartz[i]) return schwartz[i];
  for (size_t i = 0; i < kDecision.size(); ++i)
    if (name == kDecision[i]) return decision[i];
  return std::nullopt;
}

Corpus::Corpus(std::vector<Dialogue> dialogues, std::vector<ParticipantProfile> profiles)
    : dialogues_(std::move(dialogues)), profiles_(std::move(profiles)) {
  for (size_t i = 0; i < dialogues_.size(); ++i) {
    dialogue_index_.emplace(dialogues_[i].id, i);
    for (const auto& turn : dialogues_[i].turns)
      for (const auto& s : turn.sentences) vocabulary_.insert(s.tokens.begin(), s.tokens.end());
  }
  // First record wins when a (dialogue, role) pair repeats.
  for (size_t i = 0; i < profiles_.size(); ++i)
    profile_index_.emplace(std::make_pair(profiles_[i].dialogue_id, profiles_[i].role), i);
}

const Dialogue* Corpus::find_dialogue(std::string_view id) const {
  auto it = dialogue_index_.find(id);
  return it == dialogue_index_.end() ? nullptr : &dialogues_[it->second];
}

const ParticipantProfile* Corpus::profile_for(std::string_view dialogue_id, Role role) const {
  auto it = profile_index_.find(std::make_pair(std::string(dialogue_id), role));
  return it == profile_index_.end() ? nullptr : &profiles_[it->second];
}

Corpus Corpus::annotated_subset() const {
  std::vector<Dialogue> ds;
  std::set<std::string> ids;
  for (const auto& d : dialogues_) {
    if (!d.annotated) continue;
    ds.push_back(d);
    ids.insert(d.id);
  }
  std::vector<ParticipantProfile> ps;
  for (const auto& p : profiles_)
    if (ids.count(p.dialogue_id)) ps.push_back(p);
  return Corpus(std::move(ds), std::move(ps));
}

ColumnMap ColumnMap::parse(std::string_view text) {
  ColumnMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("column map line " + std::to_string(lineno) + ": expected key=value");
    m.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return m;
}

ColumnMap ColumnMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open column map " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ColumnMap::resolve(std::string_view field) const {
  auto it = map_.find(field);
  return it == map_.end() ? std::string(field) : it->second;
}

IngestResult ingest(const std::string& dialogue_file, const std::string& profile_file,
                    const ColumnMap& columns, const IngestOptions& options) {
  IngestResult result;
  auto report = [&](const std::string& file, size_t line, std::string field, std::string msg) {
    if (options.strict)
      throw ParseError(file + ":" + std::to_string(line) + ": " + field + ": " + msg);
    result.errors.push_back({file, line, std::move(field), std::move(msg)});
  };

  // Profiles first so dialogues can be linked.
  csv::Row pheader;
  std::vector<size_t> plines;
  const auto prows = read_all(profile_file, pheader, plines);
  csv::Table ptable(pheader);
  FieldIndex pf{ptable, columns, profile_file, {}};
  const auto p_worker = pf.get("worker_id", true);
  const auto p_dialogue = pf.get("dialogue_id", true);
  const auto p_role = pf.get("role", true);
  const auto p_actual = pf.get("donation_actual", true);
  const auto p_promised = pf.get("donation_promised", false);
  pf.check();
  std::vector<std::pair<std::string, std::optional<size_t>>> numeric_cols, cat_cols;
  for (const auto& f : profile_numeric_fields()) numeric_cols.emplace_back(f, pf.get(f, false));
  for (auto f : kCategoricalFields) cat_cols.emplace_back(std::string(f), pf.get(f, false));
  for (const auto& [name, idx] : numeric_cols)
    if (!idx) result.warnings.push_back(profile_file + ": no column for '" + name + "'; values set to NaN");

  std::vector<ParticipantProfile> profiles;
  for (size_t r = 0; r < prows.size(); ++r) {
    const auto& row = prows[r];
    const size_t line = plines[r];
    ParticipantProfile p;
    bool ok = true;
    p.worker_id = trim(cell(row, p_worker));
    p.dialogue_id = trim(cell(row, p_dialogue));
    if (p.worker_id.empty()) {
      report(profile_file, line, "worker_id", "empty");
      continue;
    }
    auto role = parse_role(cell(row, p_role));
    if (!role) {
      report(profile_file, line, "role", "unknown role '" + cell(row, p_role) + "'");
      continue;
    }
    p.role = *role;
    for (const auto& [name, idx] : numeric_cols) {
      bool good = true;
      const double v = parse_number(cell(row, idx), good);
      if (!good) {
        report(profile_file, line, name, "not a number: '" + cell(row, idx) + "'");
        ok = false;
        break;
      }
      *numeric_slot(p, name) = v;
    }
    if (!ok) continue;
    for (const auto& [name, idx] : cat_cols) *categorical_slot(p.demographics, name) = trim(cell(row, idx));
    bool good = true;
    const double actual = parse_number(cell(row, p_actual), good);
    if (!good || std::isnan(actual) || actual < 0) {
      report(profile_file, line, "donation_actual", "invalid amount '" + cell(row, p_actual) + "'");
      continue;
    }
    if (actual > options.payment_cap + 1e-9) {
      report(profile_file, line, "donation_actual", "exceeds payment cap");
      continue;
    }
    p.donation_actual = actual;
    if (p_promised) {
      const double promised = parse_number(cell(row, p_promised), good);
      if (!good || (!std::isnan(promised) && promised < 0)) {
        report(profile_file, line, "donation_promised", "invalid amount '" + cell(row, p_promised) + "'");
        continue;
      }
      if (!std::isnan(promised)) p.donation_promised = promised;
    }
    profiles.push_back(std::move(p));
  }

  csv::Row dheader;
  std::vector<size_t> dlines;
  const auto drows = read_all(dialogue_file, dheader, dlines);
  csv::Table dtable(dheader);
  FieldIndex df{dtable, columns, dialogue_file, {}};
  const auto d_id = df.get("dialogue_id", true);
  const auto d_turn = df.get("turn", true);
  const auto d_role = df.get("role", true);
  const auto d_text = df.get("text", true);
  const auto d_sidx = df.get("sentence_idx", false);
  const auto d_label = df.get("label", false);
  df.check();

  std::vector<Dialogue> dialogues;
  std::map<std::string, size_t, std::less<>> by_id;
  for (size_t r = 0; r < drows.size(); ++r) {
    const auto& row = drows[r];
    const size_t line = dlines[r];
    const std::string id = trim(cell(row, d_id));
    if (id.empty()) {
      report(dialogue_file, line, "dialogue_id", "empty");
      continue;
    }
    bool good = true;
    const double turn = parse_number(cell(row, d_turn), good);
    if (!good || std::isnan(turn) || turn < 0 || turn != std::floor(turn)) {
      report(dialogue_file, line, "turn", "invalid turn '" + cell(row, d_turn) + "'");
      continue;
    }
    auto role = parse_role(cell(row, d_role));
    if (!role) {
      report(dialogue_file, line, "role", "unknown role '" + cell(row, d_role) + "'");
      continue;
    }
    std::optional<int> sidx;
    if (d_sidx) {
      const double s = parse_number(cell(row, d_sidx), good);
      if (!good || (!std::isnan(s) && (s < 0 || s != std::floor(s)))) {
        report(dialogue_file, line, "sentence_idx", "invalid index '" + cell(row, d_sidx) + "'");
        continue;
      }
      if (!std::isnan(s)) sidx = static_cast<int>(s);
    }
    const std::string text = trim(cell(row, d_text));
    if (text.empty()) {
      result.warnings.push_back(dialogue_file + ":" + std::to_string(line) + ": empty text skipped");
      continue;
    }

    auto [it, inserted] = by_id.emplace(id, dialogues.size());
    if (inserted) dialogues.push_back(Dialogue{id, {}, {}, {}, false});
    Dialogue& d = dialogues[it->second];
    const int turn_index = static_cast<int>(turn);
    if (d.turns.empty() || d.turns.back().index != turn_index || d.turns.back().role != *role)
      d.turns.push_back(Turn{turn_index, *role, {}});
    Turn& t = d.turns.back();

    // Without a sentence index the row is a whole utterance.
    std::vector<std::string> pieces = sidx ? std::vector<std::string>{text} : segment(text);
    const std::string raw_label = d_label ? trim(cell(row, d_label)) : std::string();
    for (auto& piece : pieces) {
      Sentence s;
      s.dialogue_id = id;
      s.turn_index = turn_index;
      s.sentence_index = sidx ? *sidx : static_cast<int>(t.sentences.size());
      s.role = *role;
      s.text = std::move(piece);
      s.tokens = tokenize(s.text);
      if (s.tokens.empty()) continue;
      if (!raw_label.empty()) {
        if (*role == Role::Persuader)
          s.label = parse_strategy_label(raw_label);
        else
          s.label = parse_persuadee_act(raw_label);
        d.annotated = true;
      }
      t.sentences.push_back(std::move(s));
    }
  }

  std::vector<std::string> unlinked;
  std::map<std::pair<std::string, Role>, std::string> owner;
  for (const auto& p : profiles) owner.emplace(std::make_pair(p.dialogue_id, p.role), p.worker_id);
  for (auto& d : dialogues) {
    for (auto& t : d.turns)
      std::stable_sort(t.sentences.begin(), t.sentences.end(),
                       [](const Sentence& a, const Sentence& b) {
                         return a.sentence_index < b.sentence_index;
                       });
    auto er = owner.find({d.id, Role::Persuader});
    auto ee = owner.find({d.id, Role::Persuadee});
    if (er == owner.end() || ee == owner.end()) {
      unlinked.push_back(d.id);
      continue;
    }
    d.persuader_id = er->second;
    d.persuadee_id = ee->second;

    size_t per_side[2] = {0, 0};
    for (size_t i = 0; i < d.turns.size(); ++i) {
      ++per_side[static_cast<size_t>(d.turns[i].role)];
      if (i > 0 && d.turns[i].role == d.turns[i - 1].role)
        result.warnings.push_back("dialogue " + d.id + ": consecutive " +
                                  std::string(key(d.turns[i].role)) + " turns at turn " +
                                  std::to_string(d.turns[i].index));
    }
    if (per_side[0] < 10 || per_side[1] < 10)
      result.warnings.push_back("dialogue " + d.id + ": fewer than 10 turns per side");
  }
  if (!unlinked.empty()) {
    std::string msg = "dialogue(s) without persuader/persuadee profile:";
    for (const auto& id : unlinked) msg += " " + id;
    throw LinkError(msg);
  }

  result.corpus = Corpus(std::move(dialogues), std::move(profiles));
  return result;
}

void serialize(const Corpus& corpus, const std::string& dialogue_file,
               const std::string& profile_file) {
  std::ofstream dout(dialogue_file, std::ios::binary);
  if (!dout) throw Error("cannot write " + dialogue_file);
  csv::write_row(dout, {"dialogue_id", "turn", "sentence_idx", "role", "text", "label"});
  for (const auto& d : corpus.dialogues())
    for (const auto& t : d.turns)
      for (const auto& s : t.sentences) {
        std::string label;
        if (auto st = s.strategy()) label = key(*st);
        if (auto a = s.act()) label = key(*a);
        csv::write_row(dout, {s.dialogue_id, std::to_string(s.turn_index),
                              std::to_string(s.sentence_index), std::string(key(s.role)), s.text,
                              label});
      }

  std::ofstream pout(profile_file, std::ios::binary);
  if (!pout) throw Error("cannot write " + profile_file);
  csv::Row header{"worker_id", "dialogue_id", "role"};
  for (auto f : kCategoricalFields) header.emplace_back(f);
  for (const auto& f : profile_numeric_fields()) header.push_back(f);
  header.emplace_back("donation_promised");
  header.emplace_back("donation_actual");
  csv::write_row(pout, header);
  for (auto p : corpus.profiles()) {
    csv::Row row{p.worker_id, p.dialogue_id, std::string(key(p.role))};
    for (auto f : kCategoricalFields) row.push_back(*categorical_slot(p.demographics, f));
    for (const auto& f : profile_numeric_fields()) row.push_back(format_number(*numeric_slot(p, f)));
    row.push_back(p.donation_promised ? format_number(*p.donation_promised) : "");
    row.push_back(format_number(p.donation_actual));
    csv::write_row(pout, row);
  }
}

bool donated(const ParticipantProfile& p, DonationBasis basis) {
  if (basis == DonationBasis::Promised) return p.donation_promised.value_or(0.0) > 0.0;
  return p.donation_actual > 0.0;
}

CorpusStats corpus_stats(const Corpus& corpus, DonationBasis basis) {
  if (corpus.dialogues().empty()) throw EmptyInputError("corpus_stats: empty corpus");
  CorpusStats s;
  s.dialogues = corpus.dialogues().size();
  std::set<std::string> workers;
  for (const auto& p : corpus.profiles()) workers.insert(p.worker_id);
  s.participants = workers.size();

  double words[2] = {0, 0};
  size_t utterances[2] = {0, 0};
  double turn_sum = 0;
  for (const auto& d : corpus.dialogues()) {
    if (d.annotated) ++s.annotated;
    turn_sum += static_cast<double>(d.turns.size()) / 2.0;
    for (const auto& t : d.turns) {
      size_t n = 0;
      for (const auto& sen : t.sentences)
        n += static_cast<size_t>(std::count_if(sen.tokens.begin(), sen.tokens.end(),
                                               [](const std::string& tok) { return is_word(tok); }));
      words[static_cast<size_t>(t.role)] += static_cast<double>(n);
      ++utterances[static_cast<size_t>(t.role)];
    }
  }
  s.mean_turns = turn_sum / static_cast<double>(s.dialogues);
  const size_t total_utt = utterances[0] + utterances[1];
  s.mean_words_per_utterance = total_utt ? (words[0] + words[1]) / static_cast<double>(total_utt) : 0.0;
  for (size_t r = 0; r < 2; ++r)
    s.words_per_utterance[r] = utterances[r] ? words[r] / static_cast<double>(utterances[r]) : 0.0;
  s.unique_tokens = corpus.vocabulary().size();

  double donation_sum = 0;
  size_t persuadees = 0;
  for (const auto& p : corpus.profiles()) {
    const auto r = static_cast<size_t>(p.role);
    if (donated(p, basis))
      ++s.donated[r];
    else
      ++s.not_donated[r];
    if (p.role == Role::Persuadee) {
      donation_sum += p.donation_actual;
      ++persuadees;
    }
  }
  s.mean_donation = persuadees ? donation_sum / static_cast<double>(persuadees) : 0.0;
  return s;
}

std::string format_stats_table(const CorpusStats& s) {
  auto pct = [](size_t a, size_t b) {
    return b ? static_cast<int>(std::lround(100.0 * static_cast<double>(a) / static_cast<double>(b))) : 0;
  };
  char buf[2048];
  const size_t er = s.donated[0] + s.not_donated[0];
  const size_t ee = s.donated[1] + s.not_donated[1];
  std::snprintf(buf, sizeof buf,
                "Dataset statistics\n"
                "  %-32s %zu\n  %-32s %zu\n  %-32s %zu\n  %-32s $%.2f\n"
                "  %-32s %.2f\n  %-32s %.2f\n  %-32s %zu\n"
                "Participant statistics\n"
                "  %-32s %-14s %s\n"
                "  %-32s %-14.2f %.2f\n"
                "  %-32s %-14s %s\n"
                "  %-32s %-14s %s\n",
                "# Dialogues", s.dialogues, "# Annotated dialogues", s.annotated,
                "# Participants", s.participants, "Avg. donation", s.mean_donation,
                "Avg. turns per dialogue", s.mean_turns, "Avg. words per utterance",
                s.mean_words_per_utterance, "Total unique tokens", s.unique_tokens, "Metric",
                "Persuader", "Persuadee", "Avg. words per utterance", s.words_per_utterance[0],
                s.words_per_utterance[1], "Donated",
                (std::to_string(s.donated[0]) + " (" + std::to_string(pct(s.donated[0], er)) + "%)").c_str(),
                (std::to_string(s.donated[1]) + " (" + std::to_string(pct(s.donated[1], ee)) + "%)").c_str(),
                "Not donated",
                (std::to_string(s.not_donated[0]) + " (" + std::to_string(pct(s.not_donated[0], er)) + "%)").c_str(),
                (std::to_string(s.not_donated[1]) + " (" + std::to_string(pct(s.not_donated[1], ee)) + "%)").c_str());
  return buf;
}

std::string format_stats_kv(const CorpusStats& s) {
  std::ostringstream out;
  out.precision(17);
  out << "dialogues=" << s.dialogues << "\n"
      << "annotated_dialogues=" << s.annotated << "\n"
      << "participants=" << s.participants << "\n"
      << "mean_donation=" << s.mean_donation << "\n"
      << "mean_turns_per_dialogue=" << s.mean_turns << "\n"
      << "mean_words_per_utterance=" << s.mean_words_per_utterance << "\n"
      << "persuader_words_per_utterance=" << s.words_per_utterance[0] << "\n"
      << "persuadee_words_per_utterance=" << s.words_per_utterance[1] << "\n"
      << "unique_tokens=" << s.unique_tokens << "\n"
      << "persuader_donated=" << s.donated[0] << "\n"
      << "persuader_not_donated=" << s.not_donated[0] << "\n"
      << "persuadee_donated=" << s.donated[1] << "\n"
      << "persuadee_not_donated=" << s.not_donated[1] << "\n";
  return out.str();
}

StrategyCounts strategy_counts(const Corpus& corpus) {
  StrategyCounts counts{};
  size_t total = 0;
  for (const auto& d : corpus.dialogues())
    for (const auto& t : d.turns)
      for (const auto& s : t.sentences)
        if (auto l = s.strategy()) {
          ++counts[index_of(*l)];
          ++total;
        }
  if (total == 0) throw EmptyInputError("strategy_counts: no annotated persuader sentences");
  return counts;
}

std::vector<size_t> turn_histogram(const Corpus& corpus, StrategyLabel label, int max_turn) {
  if (max_turn < 0) throw DomainError("turn_histogram: max_turn must be >= 0");
  std::vector<size_t> hist(static_cast<size_t>(max_turn) + 1, 0);
  for (const auto& d : corpus.dialogues())
    for (const auto& t : d.turns) {
      if (t.role != Role::Persuader) continue;
      const auto bucket = static_cast<size_t>(std::min(t.index, max_turn));
      for (const auto& s : t.sentences)
        if (s.strategy() == label) ++hist[bucket];
    }
  return hist;
}

std::vector<ParticipantProfile> dedup_first_task(const std::vector<ParticipantProfile>& profiles) {
  std::vector<ParticipantProfile> out;
  std::set<std::string> seen;
  for (const auto& p : profiles)
    if (seen.insert(p.worker_id).second) out.push_back(p);
  return out;
}

TraitSplit trait_means_by_donation(const Corpus& corpus, DonationBasis basis) {
  TraitSplit split;
  std::array<double, 5> sum_d{}, sum_n{};
  std::array<size_t, 5> n_d{}, n_n{};
  for (const auto& p : corpus.profiles()) {
    if (p.role != Role::Persuadee) continue;
    const bool d = donated(p, basis);
    auto& sum = d ? sum_d : sum_n;
    auto& n = d ? n_d : n_n;
    // Missing answers drop out of that trait's mean only.
    for (size_t i = 0; i < 5; ++i) {
      if (std::isnan(p.big_five[i])) continue;
      sum[i] += p.big_five[i];
      ++n[i];
    }
    ++(d ? split.n_donated : split.n_not_donated);
  }
  if (split.n_donated == 0 || split.n_not_donated == 0)
    throw DomainError("trait_means_by_donation: degenerate group (donated=" +
                      std::to_string(split.n_donated) +
                      ", not donated=" + std::to_string(split.n_not_donated) + ")");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t i = 0; i < 5; ++i) {
    split.mean_donated[i] = n_d[i] ? sum_d[i] / static_cast<double>(n_d[i]) : nan;
    split.mean_not_donated[i] = n_n[i] ? sum_n[i] / static_cast<double>(n_n[i]) : nan;
  }
  return split;
}

}  // namespace p4g
