#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "p4g/error.hpp"
#include "p4g/model.hpp"

using namespace p4g;

namespace {

constexpr int kVocab = 30;

ModelConfig small_config(Architecture a, ContextMode ctx, FeatureToggles f = {true, true, true}) {
  ModelConfig c;
  c.architecture = a;
  c.context = ctx;
  c.features = f;
  c.word_dim = 6;
  c.lstm_hidden = 5;
  c.latent_dim = 7;
  c.turn_embed_dim = 3;
  c.char_dim = 16;
  c.char_proj_dim = 3;
  c.context_cnn_maps = 4;
  c.context_cnn_width = 2;
  c.tfidf_dim = 4;
  c.attention_dim = 4;
  c.cnn_widths = {2, 3};
  c.cnn_maps = 3;
  return c;
}

Eigen::MatrixXd embeddings(size_t dim, uint64_t seed = 9) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 0.5);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), kVocab);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n(rng);
  m.col(0).setZero();
  return m;
}

FeatureBundle bundle(std::mt19937_64& rng, size_t len, size_t ctx_len, size_t char_dim = 16) {
  std::uniform_int_distribution<int> tok(0, kVocab - 1);
  std::uniform_real_distribution<double> u(0, 1);
  FeatureBundle b;
  for (size_t i = 0; i < len; ++i) b.token_ids.push_back(tok(rng));
  for (size_t i = 0; i < ctx_len; ++i) b.context_tokens.push_back(tok(rng));
  b.turn_position = std::uniform_int_distribution<int>(0, 9)(rng);
  const double a = u(rng), c = u(rng), d = u(rng);
  b.sentiment = {a / (a + c + d), c / (a + c + d), d / (a + c + d)};
  for (size_t i = 0; i < char_dim; ++i) b.char_vector.push_back(u(rng) - 0.5);
  return b;
}

// Perturbs model parameters away from their zero-initialized biases so the
// check is not taken at a special point.
void jitter(Model& m, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 0.1);
  for (size_t i = 0; i < m.params().size(); ++i) {
    auto& v = m.params().value(i);
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += n(rng);
  }
}

struct GradCase {
  Architecture arch;
  ContextMode ctx;
};

std::string case_name(const ::testing::TestParamInfo<GradCase>& info) {
  std::string a(key(info.param.arch)), c(key(info.param.ctx));
  for (auto& ch : a)
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  return a + "_" + c;
}

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

}  // namespace

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto [arch, ctx] = GetParam();
  Model model(small_config(arch, ctx), embeddings(6), 3);
  jitter(model, 17);
  std::mt19937_64 rng(21);
  std::vector<FeatureBundle> inputs = {bundle(rng, 5, 4), bundle(rng, 1, 0), bundle(rng, 2, 3)};
  if (ctx == ContextMode::Tfidf) model.fit_idf(inputs);

  constexpr double h = 1e-5;
  std::uniform_int_distribution<int> label(0, kNumLabels - 1);
  size_t checked = 0;
  double worst = 0;
  for (size_t bi = 0; bi < inputs.size(); ++bi) {
    const auto& b = inputs[bi];
    const int y = label(rng);
    // Fixed dropout mask: every evaluation restarts the same stream.
    const bool with_dropout = bi == 0;
    auto loss = [&](Gradients* g) {
      std::mt19937_64 mask(99);
      return model.loss_and_gradient(b, y, g, with_dropout ? &mask : nullptr, 0.7);
    };
    auto grads = model.params().zeros_like();
    loss(&grads);
    for (size_t p = 0; p < model.params().size(); ++p) {
      auto& value = model.params().value(p);
      std::uniform_int_distribution<Eigen::Index> pick(0, value.size() - 1);
      for (int s = 0; s < 4; ++s) {
        const auto k = pick(rng);
        const double orig = value.data()[k];
        value.data()[k] = orig + h;
        const double up = loss(nullptr);
        value.data()[k] = orig - h;
        const double down = loss(nullptr);
        value.data()[k] = orig;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grads[p].data()[k];
        const double rel = std::fabs(numeric - analytic) / std::max(std::fabs(numeric) + std::fabs(analytic), 1e-5);
        worst = std::max(worst, rel);
        EXPECT_LT(rel, 1e-4) << model.params().name(p) << "[" << k << "] analytic " << analytic << " numeric "
                             << numeric;
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 20u);
  RecordProperty("worst_relative_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(
    AllArchitectures, GradientCheck,
    ::testing::Values(GradCase{Architecture::Rcnn, ContextMode::None}, GradCase{Architecture::Rcnn, ContextMode::Rnn},
                      GradCase{Architecture::Rcnn, ContextMode::Cnn}, GradCase{Architecture::Rcnn, ContextMode::Mean},
                      GradCase{Architecture::Rcnn, ContextMode::Tfidf},
                      GradCase{Architecture::BlstmAttention, ContextMode::None},
                      GradCase{Architecture::BlstmAttention, ContextMode::Rnn},
                      GradCase{Architecture::BlstmAttention, ContextMode::Mean},
                      GradCase{Architecture::Cnn, ContextMode::None}, GradCase{Architecture::Cnn, ContextMode::Rnn},
                      GradCase{Architecture::Cnn, ContextMode::Tfidf}),
    case_name);

TEST(Softmax, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 30);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd z(11);
    for (auto& v : z) v = n(rng);
    const auto p = softmax(z);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    const auto q = softmax((z.array() + 123.456).matrix());
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-9);
  }
  Eigen::VectorXd big(3);
  big << 1000, 1000, -1000;
  const auto p = softmax(big);
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p(0), 0.5, 1e-12);
}

TEST(Argmax, TiesGoToLowestIndex) {
  Eigen::VectorXd v(4);
  v << 0.1, 0.4, 0.4, 0.1;
  EXPECT_EQ(argmax(v), 1u);
}

TEST(Forward, ProbabilitiesSumToOneOnEveryPath) {
  std::mt19937_64 rng(4);
  for (auto a : {Architecture::Rcnn, Architecture::BlstmAttention, Architecture::Cnn})
    for (auto c : {ContextMode::None, ContextMode::Rnn, ContextMode::Cnn, ContextMode::Mean, ContextMode::Tfidf}) {
      Model m(small_config(a, c), embeddings(6), 5);
      for (size_t len : {1u, 2u, 7u}) {
        const auto r = m.forward(bundle(rng, len, len % 3));
        ASSERT_EQ(r.probs.size(), 11);
        EXPECT_NEAR(r.probs.sum(), 1.0, 1e-6);
        EXPECT_EQ(static_cast<size_t>(r.final_vector.size()), m.config().final_dim());
      }
    }
}

TEST(Forward, AttentionWeightsNormalized) {
  std::mt19937_64 rng(8);
  Model m(small_config(Architecture::BlstmAttention, ContextMode::None), embeddings(6), 5);
  const auto r = m.forward(bundle(rng, 6, 0));
  ASSERT_EQ(r.attention.size(), 6);
  EXPECT_NEAR(r.attention.sum(), 1.0, 1e-12);
  const auto single = m.forward(bundle(rng, 1, 0));
  EXPECT_NEAR(single.attention(0), 1.0, 1e-15);
}

TEST(Forward, CnnPadsShortSentences) {
  std::mt19937_64 rng(8);
  auto cfg = small_config(Architecture::Cnn, ContextMode::None, {});
  cfg.cnn_widths = {3, 4, 5};
  Model m(cfg, embeddings(6), 5);
  const auto r = m.forward(bundle(rng, 2, 0));
  EXPECT_EQ(r.final_vector.size(), 9);
  EXPECT_TRUE(r.probs.allFinite());
}

TEST(Forward, DisabledFeaturesAreNotRead) {
  std::mt19937_64 rng(12);
  const auto base = bundle(rng, 5, 3);
  for (auto a : {Architecture::Rcnn, Architecture::BlstmAttention, Architecture::Cnn}) {
    for (int off = 0; off < 3; ++off) {
      FeatureToggles f{off != 0, off != 1, off != 2};
      Model m(small_config(a, ContextMode::Rnn, f), embeddings(6), 2);
      auto changed = base;
      if (off == 0) changed.turn_position = (base.turn_position + 4) % 10;
      if (off == 1) changed.sentiment = {0.9, 0.05, 0.05};
      if (off == 2)
        for (auto& v : changed.char_vector) v = -3 * v + 1;
      const auto x = m.forward(base).logits, y = m.forward(changed).logits;
      EXPECT_TRUE((x.array() == y.array()).all()) << key(a) << " feature " << off;
      // The enabled features do move the output.
      auto other = base;
      other.turn_position = (base.turn_position + 4) % 10;
      other.sentiment = {0.9, 0.05, 0.05};
      for (auto& v : other.char_vector) v = -3 * v + 1;
      EXPECT_FALSE((m.forward(other).logits.array() == x.array()).all());
    }
    Model none(small_config(a, ContextMode::None), embeddings(6), 2);
    auto ctx = base;
    ctx.context_tokens = {4, 5, 6, 7};
    EXPECT_TRUE((none.forward(base).logits.array() == none.forward(ctx).logits.array()).all());
  }
}

TEST(Forward, EmptyRnnContextEqualsNoContext) {
  std::mt19937_64 rng(13);
  for (auto a : {Architecture::Rcnn, Architecture::BlstmAttention}) {
    Model with(small_config(a, ContextMode::Rnn), embeddings(6), 31);
    Model without(small_config(a, ContextMode::None), embeddings(6), 31);
    for (int t = 0; t < 5; ++t) {
      const auto b = bundle(rng, 4, 0);
      EXPECT_LT((with.forward(b).logits - without.forward(b).logits).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Forward, EmptyContextGivesZeroVector) {
  std::mt19937_64 rng(14);
  for (auto c : {ContextMode::Cnn, ContextMode::Mean, ContextMode::Tfidf}) {
    Model m(small_config(Architecture::Rcnn, c, {}), embeddings(6), 3);
    const auto r = m.forward(bundle(rng, 3, 0));
    const auto n = static_cast<Eigen::Index>(m.config().context_vector_dim());
    EXPECT_EQ(r.final_vector.tail(n).cwiseAbs().maxCoeff(), 0.0) << key(c);
  }
}

TEST(Forward, MeanContextAveragesWordVectors) {
  const auto emb = embeddings(6);
  Model m(small_config(Architecture::Rcnn, ContextMode::Mean, {}), emb, 3);
  FeatureBundle b;
  b.token_ids = {1, 2};
  b.context_tokens = {3, 8};
  const auto r = m.forward(b);
  const Eigen::VectorXd expected = (emb.col(3) + emb.col(8)) / 2;
  EXPECT_LT((r.final_vector.tail(6) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, SameNamedTensorsStartEqualAcrossConfigs) {
  Model a(small_config(Architecture::Rcnn, ContextMode::None, {}), embeddings(6), 77);
  Model b(small_config(Architecture::Rcnn, ContextMode::Cnn, {true, true, true}), embeddings(6), 77);
  const auto i = *a.params().find("rnn.fwd.Wx");
  const auto j = *b.params().find("rnn.fwd.Wx");
  EXPECT_TRUE((a.params().value(i).array() == b.params().value(j).array()).all());
}

TEST(Predict, DeterministicAndRejectsNonFiniteParameters) {
  std::mt19937_64 rng(15);
  Model m(small_config(Architecture::Rcnn, ContextMode::Rnn), embeddings(6), 4);
  const auto b = bundle(rng, 4, 2);
  const auto p = predict(b, m);
  const auto q = predict(b, m);
  EXPECT_EQ(p.label, q.label);
  EXPECT_EQ(index_of(p.label), argmax(p.probs));
  EXPECT_TRUE((p.probs.array() == q.probs.array()).all());
  m.params().value(0)(0, 0) = std::nan("");
  EXPECT_THROW(predict(b, m), NumericError);
}

TEST(Config, RejectsBadValues) {
  auto c = small_config(Architecture::Rcnn, ContextMode::None);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(Architecture::Rcnn, ContextMode::None);
  c.n_classes = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_context_mode("lstm"), ConfigError);
  EXPECT_EQ(parse_context_mode("rnn"), ContextMode::Rnn);
  EXPECT_EQ(parse_architecture(key(Architecture::BlstmAttention)), Architecture::BlstmAttention);
}

TEST(Config, DefaultDimensions) {
  ModelConfig c;
  c.features = {true, true, true};
  EXPECT_EQ(c.pooled_dim(), 300u);
  EXPECT_EQ(c.final_dim(), 300u + 10 + 3 + 50);
  c.architecture = Architecture::Cnn;
  EXPECT_EQ(c.pooled_dim(), 300u);
  c.architecture = Architecture::BlstmAttention;
  EXPECT_EQ(c.pooled_dim(), 400u);
}

TEST(Majority, MostFrequentWithEnumTieBreak) {
  using L = StrategyLabel;
  std::vector<L> labels = {L::EmotionAppeal, L::EmotionAppeal, L::EmotionAppeal, L::LogicalAppeal};
  EXPECT_EQ(majority_predict(labels).predict(), L::EmotionAppeal);
  std::vector<L> tie = {L::TaskInquiry, L::SourceInquiry};
  EXPECT_EQ(majority_predict(tie).label, L::SourceInquiry);
  std::vector<L> mostly_none = {L::NonStrategy, L::NonStrategy, L::CredibilityAppeal};
  EXPECT_EQ(majority_predict(mostly_none).label, L::NonStrategy);
  EXPECT_EQ(majority_predict(mostly_none, true).label, L::CredibilityAppeal);
  EXPECT_THROW(majority_predict(std::vector<L>{}), EmptyInputError);
}
