#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "p4g/corpus.hpp"

namespace p4g {

enum class OovPolicy { Zero, Mean };

// Pretrained word vectors in the word2vec/fastText text format.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(size_t dimension) : dim_(dimension) {}

  // One "token v1 ... vD" line per word, optional "count dim" header.
  // `keep`, when given, drops every word not in the set while loading.
  // `expected_dim` of 0 accepts whatever the file declares.
  static EmbeddingTable load(const std::string& path, size_t expected_dim = 0,
                             const std::set<std::string>* keep = nullptr);

  // Duplicate tokens keep the first vector.
  bool add(std::string token, std::span<const double> vec);

  size_t dimension() const { return dim_; }
  size_t size() const { return words_.size(); }
  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  void set_oov_policy(OovPolicy policy);
  OovPolicy oov_policy() const { return policy_; }

  std::span<const double> lookup(std::string_view token) const;
  std::span<const double> oov_vector() const { return oov_; }

 private:
  size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<double> data_;
  std::vector<double> oov_;
  OovPolicy policy_ = OovPolicy::Zero;
};

// token -> valence in [-4, 4]; absent tokens are neutral.
class SentimentLexicon {
 public:
  // "token<TAB>valence[<TAB>...]" per line; extra columns are ignored.
  static SentimentLexicon load(const std::string& path);
  void set(std::string token, double valence);
  double valence(std::string_view token) const;
  size_t size() const { return valence_.size(); }

 private:
  std::unordered_map<std::string, double> valence_;
};

struct Sentiment {
  double neg = 0.0;
  double neu = 1.0;
  double pos = 0.0;
};

// Proportions of the summed shifted valences: positive words contribute
// v+1, negative words |v|+1, neutral words 1 to the neutral mass.
Sentiment sentiment_scores(std::span<const std::string> tokens, const SentimentLexicon& lexicon);

inline constexpr int kDefaultTurnMax = 9;
inline constexpr size_t kCharDim = 4096;

// Clips the turn into [0, t_max].
int turn_index(int turn, int t_max = kDefaultTurnMax);

enum class TurnPositionMode { Clip, Relative };

class CharEncoder {
 public:
  virtual ~CharEncoder() = default;
  virtual size_t dimension() const { return kCharDim; }
  virtual std::vector<double> encode(std::string_view sentence) const = 0;
};

// Character-trigram counts hashed into buckets and L2-normalized. With
// padding on, the lowercased text is wrapped in '\x02'...'\x03' markers so
// short strings still yield trigrams.
class HashedTrigramEncoder : public CharEncoder {
 public:
  explicit HashedTrigramEncoder(bool pad = true, size_t dimension = kCharDim)
      : pad_(pad), dim_(dimension) {}
  size_t dimension() const override { return dim_; }
  std::vector<double> encode(std::string_view sentence) const override;
  size_t bucket(std::string_view trigram) const;

 private:
  bool pad_;
  size_t dim_;
};

// Vectors produced offline by an external character model, keyed by the
// exact sentence text ("text<TAB>v1 v2 ... vD"). Unknown sentences fall
// back to the hashed encoder.
class PrecomputedCharEncoder : public CharEncoder {
 public:
  static std::unique_ptr<PrecomputedCharEncoder> load(const std::string& path);
  size_t dimension() const override { return dim_; }
  std::vector<double> encode(std::string_view sentence) const override;
  size_t misses() const { return misses_; }

 private:
  size_t dim_ = kCharDim;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  HashedTrigramEncoder fallback_;
  mutable size_t misses_ = 0;
};

// Encoder output; an empty sentence yields zeros and a warning.
std::vector<double> char_vector(std::string_view sentence, const CharEncoder& encoder);

// Token ids for the model. Id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary from_corpus(const Corpus& corpus);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int add(const std::string& token);
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Column i holds the pretrained vector for vocabulary id i (OOV per the
// table's policy; the unknown id always maps to the OOV vector).
Eigen::MatrixXd embedding_matrix(const Vocabulary& vocab, const EmbeddingTable& table);

struct FeatureBundle {
  std::vector<int> token_ids;
  int turn_position = 0;
  Sentiment sentiment;
  std::vector<double> char_vector;
  std::vector<int> context_tokens;
};

struct FeatureTables {
  const Vocabulary* vocab = nullptr;
  const SentimentLexicon* lexicon = nullptr;
  const CharEncoder* encoder = nullptr;  // null skips the character vector
  int t_max = kDefaultTurnMax;
  TurnPositionMode turn_mode = TurnPositionMode::Clip;
};

// The previous persuadee utterance before the sentence's turn, tokenized.
std::vector<std::string> context_tokens(const Sentence& sentence, const Dialogue& dialogue);

FeatureBundle featurize(const Sentence& sentence, const Dialogue& dialogue,
                        const FeatureTables& tables);

}  // namespace p4g
