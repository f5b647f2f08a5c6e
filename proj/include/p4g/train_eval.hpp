#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "p4g/corpus.hpp"
#include "p4g/features.hpp"
#include "p4g/model.hpp"

namespace p4g {

enum class SplitUnit { Dialogue, Sentence };
enum class OptimizerKind { Adam, Momentum };

std::string_view key(SplitUnit u);
SplitUnit parse_split_unit(std::string_view s);
std::string_view key(OptimizerKind o);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  double lr0 = 0.001;
  size_t decay_every = 100;
  double decay_rate = 0.95;
  size_t batch_size = 32;
  size_t epochs = 20;
  uint64_t seed = 1;
  size_t k_folds = 5;
  SplitUnit split_unit = SplitUnit::Dialogue;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  bool class_weights = false;
  // Folds trained concurrently by cross_validate. Results do not depend on it.
  size_t jobs = 1;

  void validate() const;
};

// A labeled persuader sentence ready for the classifier.
struct Example {
  std::string id;  // "<dialogue>:<turn>:<sentence>"
  std::string dialogue_id;
  FeatureBundle features;
  StrategyLabel label = StrategyLabel::NonStrategy;
};

using ExampleRefs = std::vector<const Example*>;

// Every labeled persuader sentence of every annotated dialogue, in corpus order.
std::vector<Example> build_examples(const Corpus& corpus, const FeatureTables& tables);

// Folds as sorted example indices. With SplitUnit::Dialogue every sentence
// of a dialogue lands in the same fold.
using Fold = std::vector<size_t>;
std::vector<Fold> kfold_split(const std::vector<Example>& examples, size_t k, SplitUnit unit,
                              uint64_t seed);

// Example pointers for the fold (`test`) or for all other folds.
ExampleRefs select_fold(const std::vector<Example>& examples, const std::vector<Fold>& folds,
                        size_t fold, bool test);

// lr0 * decay_rate^floor(step / decay_every)
double lr_at_step(size_t step, const TrainConfig& config);

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;  // mean per-example loss of each epoch
  size_t steps = 0;
};

using EpochCallback = std::function<void(size_t epoch, double mean_loss)>;

// Mini-batch training of an initialized model (idf already fitted when the
// tf-idf context is used).
TrainResult train_fold(Model model, const ExampleRefs& train, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

// Builds the model from `model_config` seeded by `config.seed`, fits the
// tf-idf statistics on `train`, then trains.
TrainResult train_fold(const ExampleRefs& train, const ModelConfig& model_config,
                       const Eigen::MatrixXd& embeddings, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

// confusion[true][predicted]
using ConfusionMatrix = std::array<std::array<size_t, kNumLabels>, kNumLabels>;

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  size_t support = 0;
};

struct EvalReport {
  int fold = -1;
  double accuracy = 0;
  double macro_f1 = 0;
  std::array<ClassScores, kNumLabels> per_class{};
  ConfusionMatrix confusion{};
};

double accuracy(const ConfusionMatrix& m);
// Unweighted mean of per-class F1 over all 11 classes; F1 is 0 when
// precision + recall is 0.
double macro_f1(const ConfusionMatrix& m);
EvalReport make_report(const ConfusionMatrix& m, int fold = -1);

EvalReport evaluate(const Model& model, const ExampleRefs& test, int fold = -1);
EvalReport evaluate_constant(StrategyLabel label, const ExampleRefs& test, int fold = -1);

enum class RowKind { Majority, MajorityStrategy, Model };

struct AblationRow {
  std::string name;
  std::string display;
  RowKind kind = RowKind::Model;
  ModelConfig model;
};

// The baseline and hybrid-RCNN ablation grid, derived from `base` dimensions.
std::vector<AblationRow> standard_rows(const ModelConfig& base = {});
const AblationRow& find_row(const std::vector<AblationRow>& rows, std::string_view name);

struct CvRow {
  std::string name;
  std::string display;
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<EvalReport> folds;
};

CvRow cross_validate_row(const std::vector<Example>& examples, const std::vector<Fold>& folds,
                         const AblationRow& row, const Eigen::MatrixXd& embeddings,
                         const TrainConfig& config);

std::vector<CvRow> cross_validate(const std::vector<Example>& examples,
                                  const std::vector<AblationRow>& rows,
                                  const Eigen::MatrixXd& embeddings, const TrainConfig& config);

// Aligned text: model, accuracy %, macro F1 %.
std::string format_ablation_table(const std::vector<CvRow>& rows);
// Header row of label keys, then one row per true label.
std::string confusion_csv(const ConfusionMatrix& m);

}  // namespace p4g
