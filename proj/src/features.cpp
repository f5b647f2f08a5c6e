#include "p4g/features.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "p4g/error.hpp"
#include "p4g/log.hpp"
#include "p4g/text.hpp"

namespace p4g {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& v) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_count(std::string_view s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

}  // namespace

EmbeddingTable EmbeddingTable::load(const std::string& path, size_t expected_dim,
                                    const std::set<std::string>* keep) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings " + path);
  EmbeddingTable table(expected_dim);
  std::string line;
  size_t lineno = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (lineno == 1 && fields.size() == 2 && is_count(fields[0]) && is_count(fields[1])) {
      const size_t declared = std::stoul(std::string(fields[1]));
      if (table.dim_ && table.dim_ != declared)
        throw FormatError(path + ":1: header declares dimension " + std::to_string(declared) +
                          ", expected " + std::to_string(table.dim_));
      table.dim_ = declared;
      continue;
    }
    const size_t values = fields.size() - 1;
    if (table.dim_ == 0) table.dim_ = values;
    if (values != table.dim_)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.dim_) + " values, found " + std::to_string(values));
    std::string token(fields[0]);
    if (keep && !keep->count(token)) continue;
    vec.resize(values);
    for (size_t i = 0; i < values; ++i)
      if (!parse_double(fields[i + 1], vec[i]))
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad number '" +
                          std::string(fields[i + 1]) + "'");
    table.add(std::move(token), vec);
  }
  table.set_oov_policy(table.policy_);
  return table;
}

bool EmbeddingTable::add(std::string token, std::span<const double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw FormatError("embedding for '" + token + "' has dimension " + std::to_string(vec.size()));
  if (index_.count(token)) return false;
  index_.emplace(token, words_.size());
  words_.push_back(std::move(token));
  data_.insert(data_.end(), vec.begin(), vec.end());
  if (oov_.size() != dim_) oov_.assign(dim_, 0.0);
  if (policy_ == OovPolicy::Mean) {
    const double n = static_cast<double>(words_.size());
    for (size_t d = 0; d < dim_; ++d) oov_[d] += (vec[d] - oov_[d]) / n;
  }
  return true;
}

void EmbeddingTable::set_oov_policy(OovPolicy policy) {
  policy_ = policy;
  oov_.assign(dim_, 0.0);
  if (policy == OovPolicy::Mean && !words_.empty()) {
    for (size_t w = 0; w < words_.size(); ++w)
      for (size_t d = 0; d < dim_; ++d) oov_[d] += data_[w * dim_ + d];
    for (auto& v : oov_) v /= static_cast<double>(words_.size());
  }
}

std::span<const double> EmbeddingTable::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return oov_;
  return std::span<const double>(data_.data() + it->second * dim_, dim_);
}

SentimentLexicon SentimentLexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon " + path);
  SentimentLexicon lex;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected token<TAB>valence");
    auto rest = std::string_view(line).substr(tab + 1);
    rest = rest.substr(0, rest.find('\t'));
    double v = 0;
    if (!parse_double(trim(rest), v) || !std::isfinite(v) || v < -4.0 || v > 4.0)
      throw FormatError(path + ":" + std::to_string(lineno) + ": valence must be a number in [-4, 4]");
    lex.valence_.emplace(line.substr(0, tab), v);
  }
  return lex;
}

void SentimentLexicon::set(std::string token, double valence) {
  if (!std::isfinite(valence) || valence < -4.0 || valence > 4.0)
    throw DomainError("valence must be in [-4, 4]");
  valence_[std::move(token)] = valence;
}

double SentimentLexicon::valence(std::string_view token) const {
  auto it = valence_.find(std::string(token));
  return it == valence_.end() ? 0.0 : it->second;
}

Sentiment sentiment_scores(std::span<const std::string> tokens, const SentimentLexicon& lexicon) {
  double pos = 0, neg = 0, neu = 0;
  for (const auto& t : tokens) {
    const double v = lexicon.valence(t);
    if (v > 0)
      pos += v + 1.0;
    else if (v < 0)
      neg += -v + 1.0;
    else
      neu += 1.0;
  }
  const double total = pos + neg + neu;
  if (total == 0) return {};
  return {neg / total, neu / total, pos / total};
}

int turn_index(int turn, int t_max) {
  if (turn < 0) throw DomainError("turn_index: negative turn " + std::to_string(turn));
  if (t_max < 1) throw DomainError("turn_index: t_max must be >= 1");
  return std::min(turn, t_max);
}

size_t HashedTrigramEncoder::bucket(std::string_view trigram) const {
  return static_cast<size_t>(fnv1a64(trigram) % dim_);
}

std::vector<double> HashedTrigramEncoder::encode(std::string_view sentence) const {
  std::vector<double> v(dim_, 0.0);
  std::string s = to_lower(sentence);
  if (pad_) s = "\x02" + s + "\x03";
  if (s.size() < 3) return v;
  for (size_t i = 0; i + 3 <= s.size(); ++i) v[bucket(std::string_view(s).substr(i, 3))] += 1.0;
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::unique_ptr<PrecomputedCharEncoder> PrecomputedCharEncoder::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open character vectors " + path);
  auto enc = std::unique_ptr<PrecomputedCharEncoder>(new PrecomputedCharEncoder());
  std::string line;
  size_t lineno = 0;
  size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) continue;
    const auto fields = split_ws(std::string_view(line).substr(tab + 1));
    if (dim == 0) dim = fields.size();
    if (fields.size() != dim)
      throw FormatError(path + ":" + std::to_string(lineno) + ": inconsistent vector dimension");
    std::vector<double> v(dim);
    for (size_t i = 0; i < dim; ++i)
      if (!parse_double(fields[i], v[i]))
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad number");
    enc->vectors_.emplace(line.substr(0, tab), std::move(v));
  }
  if (dim == 0) throw FormatError(path + ": no vectors");
  enc->dim_ = dim;
  enc->fallback_ = HashedTrigramEncoder(true, dim);
  return enc;
}

std::vector<double> PrecomputedCharEncoder::encode(std::string_view sentence) const {
  auto it = vectors_.find(std::string(sentence));
  if (it != vectors_.end()) return it->second;
  ++misses_;
  return fallback_.encode(sentence);
}

std::vector<double> char_vector(std::string_view sentence, const CharEncoder& encoder) {
  if (trim(sentence).empty()) {
    log::warn("char_vector: empty sentence encoded as zeros");
    return std::vector<double>(encoder.dimension(), 0.0);
  }
  return encoder.encode(sentence);
}

Vocabulary::Vocabulary() { add("<unk>"); }

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? 0 : it->second;
}

Vocabulary Vocabulary::from_corpus(const Corpus& corpus) {
  Vocabulary v;
  for (const auto& t : corpus.vocabulary()) v.add(t);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

Eigen::MatrixXd embedding_matrix(const Vocabulary& vocab, const EmbeddingTable& table) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.dimension()), static_cast<Eigen::Index>(vocab.size()));
  for (size_t i = 0; i < vocab.size(); ++i) {
    auto v = i == 0 ? table.oov_vector() : table.lookup(vocab.token(static_cast<int>(i)));
    for (size_t d = 0; d < v.size(); ++d) m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = v[d];
  }
  return m;
}

std::vector<std::string> context_tokens(const Sentence& sentence, const Dialogue& dialogue) {
  // Locate the sentence's own turn, then walk back to the nearest persuadee turn.
  size_t pos = dialogue.turns.size();
  for (size_t i = 0; i < dialogue.turns.size(); ++i)
    if (dialogue.turns[i].index == sentence.turn_index && dialogue.turns[i].role == sentence.role) {
      pos = i;
      break;
    }
  if (pos == dialogue.turns.size())
    throw DomainError("sentence turn " + std::to_string(sentence.turn_index) +
                      " not found in dialogue " + dialogue.id);
  for (size_t i = pos; i-- > 0;) {
    if (dialogue.turns[i].role != Role::Persuadee) continue;
    std::vector<std::string> out;
    for (const auto& s : dialogue.turns[i].sentences) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
  }
  return {};
}

FeatureBundle featurize(const Sentence& sentence, const Dialogue& dialogue,
                        const FeatureTables& tables) {
  if (sentence.role != Role::Persuader) throw DomainError("featurize: persuader sentences only");
  if (sentence.dialogue_id != dialogue.id)
    throw DomainError("featurize: sentence belongs to dialogue " + sentence.dialogue_id);
  if (!tables.vocab || !tables.lexicon) throw ConfigError("featurize: vocabulary and lexicon required");
  if (sentence.tokens.empty()) throw DomainError("featurize: sentence has no tokens");

  FeatureBundle b;
  for (const auto& t : sentence.tokens) b.token_ids.push_back(tables.vocab->id(t));
  for (const auto& t : context_tokens(sentence, dialogue)) b.context_tokens.push_back(tables.vocab->id(t));

  if (tables.turn_mode == TurnPositionMode::Clip) {
    b.turn_position = turn_index(sentence.turn_index, tables.t_max);
  } else {
    size_t ordinal = 0, total = 0;
    for (const auto& t : dialogue.turns) {
      if (t.role != Role::Persuader) continue;
      if (t.index < sentence.turn_index) ++ordinal;
      ++total;
    }
    const auto buckets = static_cast<size_t>(tables.t_max + 1);
    b.turn_position = static_cast<int>(std::min(buckets - 1, ordinal * buckets / std::max<size_t>(total, 1)));
  }
  b.sentiment = sentiment_scores(sentence.tokens, *tables.lexicon);
  if (tables.encoder) b.char_vector = char_vector(sentence.text, *tables.encoder);
  return b;
}

}  // namespace p4g
