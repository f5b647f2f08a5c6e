#include "p4g/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "p4g/error.hpp"
#include "p4g/text.hpp"

namespace p4g {

std::string_view key(SplitUnit u) { return u == SplitUnit::Dialogue ? "dialogue" : "sentence"; }

SplitUnit parse_split_unit(std::string_view s) {
  const auto k = to_lower(s);
  if (k == "dialogue") return SplitUnit::Dialogue;
  if (k == "sentence") return SplitUnit::Sentence;
  throw ConfigError("unknown split unit '" + std::string(s) + "'");
}

std::string_view key(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "momentum"; }

OptimizerKind parse_optimizer(std::string_view s) {
  const auto k = to_lower(s);
  if (k == "adam") return OptimizerKind::Adam;
  if (k == "momentum") return OptimizerKind::Momentum;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw ConfigError("lr0 must be > 0");
  if (!(decay_rate > 0 && decay_rate <= 1)) throw ConfigError("decay_rate must lie in (0, 1]");
  if (decay_every == 0) throw ConfigError("decay_every must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
}

std::vector<Example> build_examples(const Corpus& corpus, const FeatureTables& tables) {
  std::vector<Example> out;
  for (const auto& d : corpus.dialogues()) {
    if (!d.annotated) continue;
    for (const auto& t : d.turns) {
      if (t.role != Role::Persuader) continue;
      for (const auto& s : t.sentences) {
        auto label = s.strategy();
        if (!label) continue;
        Example e;
        e.id = d.id + ":" + std::to_string(s.turn_index) + ":" + std::to_string(s.sentence_index);
        e.dialogue_id = d.id;
        e.features = featurize(s, d, tables);
        e.label = *label;
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

std::vector<Fold> kfold_split(const std::vector<Example>& examples, size_t k, SplitUnit unit,
                              uint64_t seed) {
  if (k < 2) throw SplitError("k must be >= 2");
  std::vector<std::vector<size_t>> units;
  if (unit == SplitUnit::Sentence) {
    for (size_t i = 0; i < examples.size(); ++i) units.push_back({i});
  } else {
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < examples.size(); ++i) {
      auto [it, inserted] = index.emplace(examples[i].dialogue_id, units.size());
      if (inserted) units.emplace_back();
      units[it->second].push_back(i);
    }
  }
  if (units.size() < k)
    throw SplitError("only " + std::to_string(units.size()) + " " + std::string(key(unit)) +
                     " units for " + std::to_string(k) + " folds");
  std::vector<size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fold> folds(k);
  for (size_t i = 0; i < order.size(); ++i) {
    auto& f = folds[i % k];
    f.insert(f.end(), units[order[i]].begin(), units[order[i]].end());
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

ExampleRefs select_fold(const std::vector<Example>& examples, const std::vector<Fold>& folds,
                        size_t fold, bool test) {
  ExampleRefs out;
  for (size_t f = 0; f < folds.size(); ++f) {
    if ((f == fold) != test) continue;
    for (size_t i : folds[f]) out.push_back(&examples[i]);
  }
  if (!test)
    std::sort(out.begin(), out.end());  // corpus order
  return out;
}

double lr_at_step(size_t step, const TrainConfig& config) {
  return config.lr0 * std::pow(config.decay_rate, static_cast<double>(step / config.decay_every));
}

TrainResult train_fold(Model model, const ExampleRefs& train, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw EmptyInputError("train_fold: empty training set");

  std::array<double, kNumLabels> class_weight;
  class_weight.fill(1.0);
  if (config.class_weights) {
    std::array<size_t, kNumLabels> counts{};
    for (const auto* e : train) ++counts[index_of(e->label)];
    size_t present = 0;
    for (size_t c : counts) present += c > 0;
    for (size_t c = 0; c < kNumLabels; ++c)
      if (counts[c])
        class_weight[c] = static_cast<double>(train.size()) /
                          (static_cast<double>(present) * static_cast<double>(counts[c]));
  }

  TrainResult result{std::move(model), {}, 0};
  auto& params = result.model.params();
  Gradients grads = params.zeros_like();
  Gradients m1 = params.zeros_like();
  Gradients m2 = params.zeros_like();
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::mt19937_64 shuffle_rng(config.seed ^ 0x5eed5eedULL);
  std::mt19937_64 dropout_rng(config.seed ^ 0xd20b0a7ULL);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& g : grads) g.setZero();
      double batch_loss = 0;
      for (size_t i = start; i < end; ++i) {
        const Example& e = *train[order[i]];
        batch_loss += result.model.loss_and_gradient(e.features, static_cast<int>(index_of(e.label)),
                                                     &grads, &dropout_rng,
                                                     class_weight[index_of(e.label)]);
      }
      const double lr = lr_at_step(result.steps, config);
      if (!std::isfinite(batch_loss)) {
        std::string ids;
        for (size_t i = start; i < end; ++i) ids += " " + train[order[i]]->id;
        throw NumericError("non-finite loss at step " + std::to_string(result.steps) +
                           " (lr " + std::to_string(lr) + "), batch:" + ids);
      }
      epoch_loss += batch_loss;
      const double scale = 1.0 / static_cast<double>(end - start);
      ++result.steps;
      const double t = static_cast<double>(result.steps);
      for (size_t p = 0; p < params.size(); ++p) {
        Eigen::MatrixXd& w = params.value(p);
        const Eigen::MatrixXd g = grads[p] * scale;
        if (config.optimizer == OptimizerKind::Adam) {
          m1[p] = beta1 * m1[p] + (1 - beta1) * g;
          m2[p] = beta2 * m2[p] + (1 - beta2) * g.cwiseProduct(g);
          const double c1 = 1 - std::pow(beta1, t);
          const double c2 = 1 - std::pow(beta2, t);
          w.array() -= lr * (m1[p].array() / c1) / ((m2[p].array() / c2).sqrt() + eps);
        } else {
          m1[p] = config.momentum * m1[p] + g;
          w -= lr * m1[p];
        }
      }
    }
    const double mean = epoch_loss / static_cast<double>(train.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

TrainResult train_fold(const ExampleRefs& train, const ModelConfig& model_config,
                       const Eigen::MatrixXd& embeddings, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  Model model(model_config, embeddings, config.seed);
  if (model_config.context == ContextMode::Tfidf) {
    std::vector<FeatureBundle> bundles;
    bundles.reserve(train.size());
    for (const auto* e : train) bundles.push_back(FeatureBundle{{}, 0, {}, {}, e->features.context_tokens});
    model.fit_idf(bundles);
  }
  return train_fold(std::move(model), train, config, on_epoch);
}

double accuracy(const ConfusionMatrix& m) {
  size_t total = 0, hit = 0;
  for (size_t i = 0; i < kNumLabels; ++i)
    for (size_t j = 0; j < kNumLabels; ++j) {
      total += m[i][j];
      if (i == j) hit += m[i][j];
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

EvalReport make_report(const ConfusionMatrix& m, int fold) {
  EvalReport r;
  r.fold = fold;
  r.confusion = m;
  r.accuracy = accuracy(m);
  double sum_f1 = 0;
  for (size_t c = 0; c < kNumLabels; ++c) {
    size_t tp = m[c][c], support = 0, predicted = 0;
    for (size_t k = 0; k < kNumLabels; ++k) {
      support += m[c][k];
      predicted += m[k][c];
    }
    auto& s = r.per_class[c];
    s.support = support;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum_f1 += s.f1;
  }
  r.macro_f1 = sum_f1 / static_cast<double>(kNumLabels);
  return r;
}

double macro_f1(const ConfusionMatrix& m) { return make_report(m).macro_f1; }

EvalReport evaluate(const Model& model, const ExampleRefs& test, int fold) {
  if (test.empty()) throw EmptyInputError("evaluate: empty test set");
  ConfusionMatrix m{};
  for (const auto* e : test) ++m[index_of(e->label)][index_of(predict(e->features, model).label)];
  return make_report(m, fold);
}

EvalReport evaluate_constant(StrategyLabel label, const ExampleRefs& test, int fold) {
  if (test.empty()) throw EmptyInputError("evaluate: empty test set");
  ConfusionMatrix m{};
  for (const auto* e : test) ++m[index_of(e->label)][index_of(label)];
  return make_report(m, fold);
}

std::vector<AblationRow> standard_rows(const ModelConfig& base) {
  auto make = [&](std::string name, std::string display, Architecture a, ContextMode ctx,
                  FeatureToggles f) {
    AblationRow r{std::move(name), std::move(display), RowKind::Model, base};
    r.model.architecture = a;
    r.model.context = ctx;
    r.model.features = f;
    return r;
  };
  const FeatureToggles all{true, true, true};
  std::vector<AblationRow> rows;
  rows.push_back({"majority", "Majority vote", RowKind::Majority, base});
  rows.push_back({"majority_strategy", "Majority vote (strategies only)", RowKind::MajorityStrategy, base});
  rows.push_back(make("blstm_all", "BLSTM + All features", Architecture::BlstmAttention, ContextMode::Rnn, all));
  rows.push_back(make("cnn_all", "CNN + All features", Architecture::Cnn, ContextMode::Rnn, all));
  rows.push_back(make("sentence_only", "Sentence only", Architecture::Rcnn, ContextMode::None, {}));
  rows.push_back(make("context_cnn", "Sentence + Context CNN", Architecture::Rcnn, ContextMode::Cnn, {}));
  rows.push_back(make("context_mean", "Sentence + Context Mean", Architecture::Rcnn, ContextMode::Mean, {}));
  rows.push_back(make("context_rnn", "Sentence + Context RNN", Architecture::Rcnn, ContextMode::Rnn, {}));
  rows.push_back(make("context_tfidf", "Sentence + Context tf-idf", Architecture::Rcnn, ContextMode::Tfidf, {}));
  rows.push_back(make("turn_position", "Sentence + Turn position", Architecture::Rcnn, ContextMode::None, {true, false, false}));
  rows.push_back(make("sentiment", "Sentence + Sentiment", Architecture::Rcnn, ContextMode::None, {false, true, false}));
  rows.push_back(make("character", "Sentence + Character", Architecture::Rcnn, ContextMode::None, {false, false, true}));
  rows.push_back(make("all_features", "All features", Architecture::Rcnn, ContextMode::Rnn, all));
  return rows;
}

const AblationRow& find_row(const std::vector<AblationRow>& rows, std::string_view name) {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw ConfigError("unknown ablation row '" + std::string(name) + "'");
}

CvRow cross_validate_row(const std::vector<Example>& examples, const std::vector<Fold>& folds,
                         const AblationRow& row, const Eigen::MatrixXd& embeddings,
                         const TrainConfig& config) {
  CvRow out{row.name, row.display, 0, 0, std::vector<EvalReport>(folds.size())};
  auto run_fold = [&](size_t f) {
    const auto train = select_fold(examples, folds, f, false);
    const auto test = select_fold(examples, folds, f, true);
    if (row.kind == RowKind::Model) {
      auto trained = train_fold(train, row.model, embeddings, config);
      out.folds[f] = evaluate(trained.model, test, static_cast<int>(f));
    } else {
      std::vector<StrategyLabel> labels;
      for (const auto* e : train) labels.push_back(e->label);
      const auto clf = majority_predict(labels, row.kind == RowKind::MajorityStrategy);
      out.folds[f] = evaluate_constant(clf.predict(), test, static_cast<int>(f));
    }
  };
  const size_t jobs = row.kind == RowKind::Model ? std::min(config.jobs, folds.size()) : 1;
  if (jobs <= 1) {
    for (size_t f = 0; f < folds.size(); ++f) run_fold(f);
  } else {
    for (size_t start = 0; start < folds.size(); start += jobs) {
      std::vector<std::thread> workers;
      std::vector<std::exception_ptr> errors(jobs);
      for (size_t f = start; f < std::min(folds.size(), start + jobs); ++f)
        workers.emplace_back([&, f] {
          try {
            run_fold(f);
          } catch (...) {
            errors[f - start] = std::current_exception();
          }
        });
      for (auto& w : workers) w.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  }
  for (const auto& r : out.folds) {
    out.accuracy += r.accuracy;
    out.macro_f1 += r.macro_f1;
  }
  out.accuracy /= static_cast<double>(folds.size());
  out.macro_f1 /= static_cast<double>(folds.size());
  return out;
}

std::vector<CvRow> cross_validate(const std::vector<Example>& examples,
                                  const std::vector<AblationRow>& rows,
                                  const Eigen::MatrixXd& embeddings, const TrainConfig& config) {
  config.validate();
  const auto folds = kfold_split(examples, config.k_folds, config.split_unit, config.seed);
  std::vector<CvRow> out;
  for (const auto& row : rows) out.push_back(cross_validate_row(examples, folds, row, embeddings, config));
  return out;
}

std::string format_ablation_table(const std::vector<CvRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-34s %9s %9s\n", "Model", "Accuracy", "Macro F1");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-34s %8.1f%% %8.1f%%\n", r.display.c_str(), 100 * r.accuracy,
                  100 * r.macro_f1);
    out << buf;
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true\\predicted";
  for (size_t j = 0; j < kNumLabels; ++j) out << ',' << key(label_at(j));
  out << '\n';
  for (size_t i = 0; i < kNumLabels; ++i) {
    out << key(label_at(i));
    for (size_t j = 0; j < kNumLabels; ++j) out << ',' << m[i][j];
    out << '\n';
  }
  return out.str();
}

}  // namespace p4g
