#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "p4g/corpus.hpp"
#include "p4g/features.hpp"

namespace p4g {

enum class Architecture { Rcnn, BlstmAttention, Cnn };
enum class ContextMode { None, Rnn, Cnn, Mean, Tfidf };

std::string_view key(Architecture a);
std::string_view key(ContextMode m);
Architecture parse_architecture(std::string_view s);
ContextMode parse_context_mode(std::string_view s);

struct FeatureToggles {
  bool turn = false;
  bool sentiment = false;
  bool character = false;

  bool operator==(const FeatureToggles&) const = default;
};

struct ModelConfig {
  Architecture architecture = Architecture::Rcnn;
  size_t word_dim = 300;
  size_t lstm_hidden = 200;
  size_t latent_dim = 300;
  size_t turn_buckets = 10;
  size_t turn_embed_dim = 10;
  size_t char_dim = kCharDim;
  size_t char_proj_dim = 50;
  size_t n_classes = kNumLabels;
  ContextMode context = ContextMode::None;
  size_t context_cnn_maps = 100;
  size_t context_cnn_width = 3;
  size_t tfidf_dim = 100;
  size_t attention_dim = 150;
  std::vector<size_t> cnn_widths{3, 4, 5};
  size_t cnn_maps = 100;
  double dropout = 0.5;
  FeatureToggles features;

  void validate() const;
  // Width of the pooled sentence representation for the architecture.
  size_t pooled_dim() const;
  // Width of the context vector concatenated before the output layer
  // (zero when context enters as the recurrent initial state).
  size_t context_vector_dim() const;
  // Width of the vector fed to the output layer.
  size_t final_dim() const;
};

using Gradients = std::vector<Eigen::MatrixXd>;

// Named learnable tensors, in creation order.
class ParameterSet {
 public:
  size_t add(std::string name, Eigen::MatrixXd value);
  size_t size() const { return values_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Eigen::MatrixXd& value(size_t i) { return values_[i]; }
  const Eigen::MatrixXd& value(size_t i) const { return values_[i]; }
  std::optional<size_t> find(std::string_view name) const;
  Gradients zeros_like() const;
  size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> values_;
};

struct ForwardResult {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  Eigen::VectorXd final_vector;
  Eigen::VectorXd attention;  // self-attention BLSTM only
};

// One of the three sentence classifiers sharing the feature/context/output
// plumbing. Word embeddings are frozen; every other tensor is learnable.
class Model {
 public:
  // `embeddings` is word_dim x vocabulary_size; column 0 is the unknown token.
  Model(ModelConfig config, Eigen::MatrixXd embeddings, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  size_t vocabulary_size() const { return static_cast<size_t>(embeddings_.cols()); }

  // Smoothed inverse document frequencies over the given contexts; only
  // used by the tf-idf context mode.
  void fit_idf(std::span<const FeatureBundle> bundles);
  const Eigen::VectorXd& idf() const { return idf_; }
  void set_idf(Eigen::VectorXd idf);

  // Evaluation-mode forward pass (no dropout).
  ForwardResult forward(const FeatureBundle& bundle) const;

  // Cross-entropy of one example scaled by `weight`. When `grads` is given
  // the gradient is added into it. Dropout is active iff `dropout_rng` is
  // non-null.
  double loss_and_gradient(const FeatureBundle& bundle, int label, Gradients* grads,
                           std::mt19937_64* dropout_rng = nullptr, double weight = 1.0) const;

 private:
  ForwardResult run(const FeatureBundle& bundle, std::mt19937_64* dropout_rng, int label,
                    double weight, Gradients* grads, double* loss) const;
  void init_parameters(uint64_t seed);
  size_t param(std::string_view name) const;

  ModelConfig config_;
  Eigen::MatrixXd embeddings_;
  ParameterSet params_;
  Eigen::VectorXd idf_;
};

// Softmax with max-subtraction.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Index of the largest entry; ties resolve to the lowest index.
size_t argmax(const Eigen::VectorXd& v);

struct Prediction {
  StrategyLabel label = StrategyLabel::NonStrategy;
  Eigen::VectorXd probs;
};

Prediction predict(const FeatureBundle& bundle, const Model& model);
Prediction predict(const Sentence& sentence, const Dialogue& dialogue, const Model& model,
                   const FeatureTables& tables);

// Constant classifier returning the most frequent training label.
struct MajorityClassifier {
  StrategyLabel label = StrategyLabel::NonStrategy;
  StrategyLabel predict() const { return label; }
};

// Ties break by enum order. With `exclude_non_strategy` the non-strategy
// class is ignored when choosing (falls back to it if nothing else occurs).
MajorityClassifier majority_predict(std::span<const StrategyLabel> train_labels,
                                    bool exclude_non_strategy = false);

}  // namespace p4g
