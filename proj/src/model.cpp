#include "p4g/model.hpp"

#include <algorithm>
#include <cmath>

#include "p4g/error.hpp"
#include "p4g/text.hpp"

namespace p4g {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index ix(size_t v) { return static_cast<Index>(v); }

VectorXd sigmoid(const VectorXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

struct LstmTape {
  MatrixXd x;  // input x T
  MatrixXd h, c, gi, gf, gg, go;  // hidden x T, indexed by position
  MatrixXd h_prev;  // hidden state entering each position
  VectorXd h0;
  bool reverse = false;
};

struct LstmWeights {
  const MatrixXd& wx;
  const MatrixXd& wh;
  const MatrixXd& b;
};

// Gate layout in the stacked pre-activation: input, forget, cell, output.
void lstm_forward(const LstmWeights& w, const MatrixXd& x, const VectorXd& h0, bool reverse,
                  LstmTape& tape) {
  const Index hdim = w.wh.cols();
  const Index steps = x.cols();
  tape.x = x;
  tape.h0 = h0;
  tape.reverse = reverse;
  for (auto* m : {&tape.h, &tape.c, &tape.gi, &tape.gf, &tape.gg, &tape.go, &tape.h_prev})
    m->resize(hdim, steps);
  if (steps == 0) return;
  const MatrixXd zx = (w.wx * x).colwise() + w.b.col(0);
  VectorXd h = h0;
  VectorXd c = VectorXd::Zero(hdim);
  for (Index k = 0; k < steps; ++k) {
    const Index t = reverse ? steps - 1 - k : k;
    tape.h_prev.col(t) = h;
    const VectorXd z = zx.col(t) + w.wh * h;
    const VectorXd i = sigmoid(z.segment(0, hdim));
    const VectorXd f = sigmoid(z.segment(hdim, hdim));
    const VectorXd g = z.segment(2 * hdim, hdim).array().tanh().matrix();
    const VectorXd o = sigmoid(z.segment(3 * hdim, hdim));
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    tape.gi.col(t) = i;
    tape.gf.col(t) = f;
    tape.gg.col(t) = g;
    tape.go.col(t) = o;
    tape.c.col(t) = c;
    tape.h.col(t) = h;
  }
}

VectorXd lstm_last(const LstmTape& tape) {
  if (tape.h.cols() == 0) return tape.h0;
  return tape.reverse ? VectorXd(tape.h.col(0)) : VectorXd(tape.h.col(tape.h.cols() - 1));
}

// Backpropagates dh (hidden x T, gradient w.r.t. every emitted state) and
// returns the gradient w.r.t. the initial hidden state.
VectorXd lstm_backward(const LstmWeights& w, const LstmTape& tape, const MatrixXd& dh_in,
                       MatrixXd& dwx, MatrixXd& dwh, MatrixXd& db) {
  const Index hdim = w.wh.cols();
  const Index steps = tape.x.cols();
  VectorXd dh_next = VectorXd::Zero(hdim);
  VectorXd dc_next = VectorXd::Zero(hdim);
  if (steps == 0) return dh_next;
  MatrixXd dz(4 * hdim, steps);
  for (Index k = steps - 1; k >= 0; --k) {
    const Index t = tape.reverse ? steps - 1 - k : k;
    const Index prev = tape.reverse ? t + 1 : t - 1;
    const VectorXd dh = dh_in.col(t) + dh_next;
    const VectorXd tc = tape.c.col(t).array().tanh().matrix();
    const auto i = tape.gi.col(t).array();
    const auto f = tape.gf.col(t).array();
    const auto g = tape.gg.col(t).array();
    const auto o = tape.go.col(t).array();
    const VectorXd dc =
        (dh.array() * o * (1.0 - tc.array().square())).matrix() + dc_next;
    const VectorXd c_prev = k > 0 ? VectorXd(tape.c.col(prev)) : VectorXd::Zero(hdim);
    dz.col(t).segment(0, hdim) = (dc.array() * g * i * (1.0 - i)).matrix();
    dz.col(t).segment(hdim, hdim) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dz.col(t).segment(2 * hdim, hdim) = (dc.array() * i * (1.0 - g.square())).matrix();
    dz.col(t).segment(3 * hdim, hdim) = (dh.array() * tc.array() * o * (1.0 - o)).matrix();
    dc_next = (dc.array() * f).matrix();
    dh_next = w.wh.transpose() * dz.col(t);
  }
  dwx.noalias() += dz * tape.x.transpose();
  dwh.noalias() += dz * tape.h_prev.transpose();
  db.col(0) += dz.rowwise().sum();
  return dh_next;
}

// Unfolds X (dim x T) into (width*dim) x (T-width+1) windows.
MatrixXd unfold(const MatrixXd& x, Index width) {
  const Index dim = x.rows();
  const Index positions = x.cols() - width + 1;
  MatrixXd out(dim * width, positions);
  for (Index j = 0; j < positions; ++j)
    for (Index k = 0; k < width; ++k) out.col(j).segment(k * dim, dim) = x.col(j + k);
  return out;
}

MatrixXd pad_columns(const MatrixXd& x, Index min_cols) {
  if (x.cols() >= min_cols) return x;
  MatrixXd out = MatrixXd::Zero(x.rows(), min_cols);
  out.leftCols(x.cols()) = x;
  return out;
}

struct ConvTape {
  MatrixXd windows;
  MatrixXd z;  // after ReLU
  std::vector<Index> arg;
};

// ReLU convolution with max-over-time pooling.
VectorXd conv_pool(const MatrixXd& k, const MatrixXd& b, const MatrixXd& x, ConvTape& tape) {
  const Index width = k.cols() / x.rows();
  tape.windows = unfold(pad_columns(x, width), width);
  tape.z = ((k * tape.windows).colwise() + b.col(0)).cwiseMax(0.0);
  VectorXd pooled(k.rows());
  tape.arg.assign(static_cast<size_t>(k.rows()), 0);
  for (Index r = 0; r < k.rows(); ++r) pooled(r) = tape.z.row(r).maxCoeff(&tape.arg[static_cast<size_t>(r)]);
  return pooled;
}

void conv_pool_backward(const ConvTape& tape, const VectorXd& dpooled, MatrixXd& dk, MatrixXd& db) {
  for (Index r = 0; r < dpooled.size(); ++r) {
    const Index j = tape.arg[static_cast<size_t>(r)];
    if (tape.z(r, j) <= 0.0) continue;
    dk.row(r) += dpooled(r) * tape.windows.col(j).transpose();
    db(r, 0) += dpooled(r);
  }
}

std::vector<int> unique_ids(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

MatrixXd gather(const MatrixXd& table, const std::vector<int>& ids) {
  MatrixXd out(table.rows(), ix(ids.size()));
  for (size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || id >= table.cols()) throw ConfigError("token id out of vocabulary range");
    out.col(ix(t)) = table.col(id);
  }
  return out;
}

}  // namespace

std::string_view key(Architecture a) {
  switch (a) {
    case Architecture::Rcnn: return "rcnn";
    case Architecture::BlstmAttention: return "blstm";
    case Architecture::Cnn: return "cnn";
  }
  return "rcnn";
}

std::string_view key(ContextMode m) {
  switch (m) {
    case ContextMode::None: return "none";
    case ContextMode::Rnn: return "rnn";
    case ContextMode::Cnn: return "cnn";
    case ContextMode::Mean: return "mean";
    case ContextMode::Tfidf: return "tfidf";
  }
  return "none";
}

Architecture parse_architecture(std::string_view s) {
  const auto k = to_lower(s);
  if (k == "rcnn") return Architecture::Rcnn;
  if (k == "blstm" || k == "blstm-attention") return Architecture::BlstmAttention;
  if (k == "cnn") return Architecture::Cnn;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

ContextMode parse_context_mode(std::string_view s) {
  const auto k = to_lower(s);
  if (k == "none") return ContextMode::None;
  if (k == "rnn") return ContextMode::Rnn;
  if (k == "cnn") return ContextMode::Cnn;
  if (k == "mean") return ContextMode::Mean;
  if (k == "tfidf" || k == "tf-idf") return ContextMode::Tfidf;
  throw ConfigError("unknown context mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (!word_dim || !lstm_hidden || !latent_dim || !turn_buckets || !turn_embed_dim || !char_dim ||
      !char_proj_dim || !context_cnn_maps || !context_cnn_width || !tfidf_dim || !attention_dim ||
      !cnn_maps || cnn_widths.empty())
    throw ConfigError("model dimensions must be positive");
  if (n_classes != kNumLabels) throw ConfigError("n_classes must be 11");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  for (size_t w : cnn_widths)
    if (!w) throw ConfigError("cnn widths must be positive");
}

size_t ModelConfig::pooled_dim() const {
  switch (architecture) {
    case Architecture::Rcnn: return latent_dim;
    case Architecture::BlstmAttention: return 2 * lstm_hidden;
    case Architecture::Cnn: return cnn_maps * cnn_widths.size();
  }
  return 0;
}

size_t ModelConfig::context_vector_dim() const {
  switch (context) {
    case ContextMode::None: return 0;
    case ContextMode::Rnn: return architecture == Architecture::Cnn ? lstm_hidden : 0;
    case ContextMode::Cnn: return context_cnn_maps;
    case ContextMode::Mean: return word_dim;
    case ContextMode::Tfidf: return tfidf_dim;
  }
  return 0;
}

size_t ModelConfig::final_dim() const {
  size_t d = pooled_dim();
  if (features.turn) d += turn_embed_dim;
  if (features.sentiment) d += 3;
  if (features.character) d += char_proj_dim;
  return d + context_vector_dim();
}

size_t ParameterSet::add(std::string name, MatrixXd value) {
  if (find(name)) throw ConfigError("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<size_t> ParameterSet::find(std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

Gradients ParameterSet::zeros_like() const {
  Gradients g;
  g.reserve(values_.size());
  for (const auto& v : values_) g.push_back(MatrixXd::Zero(v.rows(), v.cols()));
  return g;
}

size_t ParameterSet::scalar_count() const {
  size_t n = 0;
  for (const auto& v : values_) n += static_cast<size_t>(v.size());
  return n;
}

Model::Model(ModelConfig config, MatrixXd embeddings, uint64_t seed)
    : config_(std::move(config)), embeddings_(std::move(embeddings)) {
  config_.validate();
  if (static_cast<size_t>(embeddings_.rows()) != config_.word_dim)
    throw ConfigError("embedding rows (" + std::to_string(embeddings_.rows()) +
                      ") differ from word_dim (" + std::to_string(config_.word_dim) + ")");
  if (embeddings_.cols() < 1) throw ConfigError("embedding matrix has no columns");
  idf_ = VectorXd::Ones(embeddings_.cols());
  init_parameters(seed);
}

void Model::init_parameters(uint64_t seed) {
  // Each tensor draws from its own stream keyed by name, so two configs
  // that share a tensor name and shape start from identical values.
  auto glorot = [&](const std::string& name, size_t rows, size_t cols) {
    std::mt19937_64 rng(seed ^ fnv1a64(name));
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    MatrixXd m(ix(rows), ix(cols));
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
    params_.add(name, std::move(m));
  };
  auto zeros = [&](const std::string& name, size_t rows) { params_.add(name, MatrixXd::Zero(ix(rows), 1)); };
  auto lstm = [&](const std::string& prefix, size_t in, size_t hidden) {
    glorot(prefix + ".Wx", 4 * hidden, in);
    glorot(prefix + ".Wh", 4 * hidden, hidden);
    MatrixXd b = MatrixXd::Zero(ix(4 * hidden), 1);
    b.block(ix(hidden), 0, ix(hidden), 1).setOnes();
    params_.add(prefix + ".b", std::move(b));
  };

  const auto& c = config_;
  const size_t h = c.lstm_hidden;
  switch (c.architecture) {
    case Architecture::Rcnn:
      lstm("rnn.fwd", c.word_dim, h);
      lstm("rnn.bwd", c.word_dim, h);
      glorot("rcnn.W", c.latent_dim, c.word_dim + 2 * h);
      zeros("rcnn.b", c.latent_dim);
      break;
    case Architecture::BlstmAttention:
      lstm("rnn.fwd", c.word_dim, h);
      lstm("rnn.bwd", c.word_dim, h);
      glorot("attn.W", c.attention_dim, 2 * h);
      zeros("attn.b", c.attention_dim);
      glorot("attn.v", c.attention_dim, 1);
      break;
    case Architecture::Cnn:
      for (size_t w : c.cnn_widths) {
        glorot("cnn.K" + std::to_string(w), c.cnn_maps, w * c.word_dim);
        zeros("cnn.b" + std::to_string(w), c.cnn_maps);
      }
      break;
  }
  switch (c.context) {
    case ContextMode::None:
    case ContextMode::Mean:
      break;
    case ContextMode::Rnn:
      lstm("ctx.rnn", c.word_dim, h);
      break;
    case ContextMode::Cnn:
      glorot("ctx.cnn.K", c.context_cnn_maps, c.context_cnn_width * c.word_dim);
      zeros("ctx.cnn.b", c.context_cnn_maps);
      break;
    case ContextMode::Tfidf:
      glorot("ctx.tfidf.W", c.tfidf_dim, vocabulary_size());
      zeros("ctx.tfidf.b", c.tfidf_dim);
      break;
  }
  if (c.features.turn) glorot("turn.E", c.turn_embed_dim, c.turn_buckets);
  if (c.features.character) {
    glorot("char.W", c.char_proj_dim, c.char_dim);
    zeros("char.b", c.char_proj_dim);
  }
  glorot("out.W", c.n_classes, c.final_dim());
  zeros("out.b", c.n_classes);
}

size_t Model::param(std::string_view name) const {
  auto i = params_.find(name);
  if (!i) throw ConfigError("missing parameter " + std::string(name));
  return *i;
}

void Model::fit_idf(std::span<const FeatureBundle> bundles) {
  const Index v = embeddings_.cols();
  VectorXd df = VectorXd::Zero(v);
  std::vector<char> seen(static_cast<size_t>(v));
  for (const auto& b : bundles) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int id : b.context_tokens)
      if (id >= 0 && id < v && !seen[static_cast<size_t>(id)]) {
        seen[static_cast<size_t>(id)] = 1;
        df(id) += 1.0;
      }
  }
  const double n = static_cast<double>(bundles.size());
  idf_ = ((1.0 + n) / (1.0 + df.array())).log() + 1.0;
}

void Model::set_idf(VectorXd idf) {
  if (idf.size() != embeddings_.cols()) throw ConfigError("idf length differs from vocabulary size");
  idf_ = std::move(idf);
}

VectorXd softmax(const VectorXd& logits) {
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

size_t argmax(const VectorXd& v) {
  size_t best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(ix(best))) best = static_cast<size_t>(i);
  return best;
}

ForwardResult Model::forward(const FeatureBundle& bundle) const {
  return run(bundle, nullptr, -1, 1.0, nullptr, nullptr);
}

double Model::loss_and_gradient(const FeatureBundle& bundle, int label, Gradients* grads,
                                std::mt19937_64* dropout_rng, double weight) const {
  if (label < 0 || static_cast<size_t>(label) >= config_.n_classes)
    throw DomainError("label out of range");
  double loss = 0;
  run(bundle, dropout_rng, label, weight, grads, &loss);
  return loss;
}

ForwardResult Model::run(const FeatureBundle& b, std::mt19937_64* dropout_rng, int label,
                         double weight, Gradients* grads, double* loss) const {
  const auto& c = config_;
  if (b.token_ids.empty()) throw DomainError("forward: empty token sequence");
  const bool backward = grads != nullptr;
  auto P = [&](std::string_view name) -> const MatrixXd& { return params_.value(param(name)); };
  auto G = [&](std::string_view name) -> MatrixXd& { return (*grads)[param(name)]; };

  const MatrixXd x = gather(embeddings_, b.token_ids);
  const Index hdim = ix(c.lstm_hidden);

  // Context.
  LstmTape ctx_tape;
  MatrixXd ctx_x;
  bool ctx_present = !b.context_tokens.empty();
  VectorXd h_init = VectorXd::Zero(hdim);
  VectorXd ctx_vec(ix(c.context_vector_dim()));
  ctx_vec.setZero();
  ConvTape ctx_conv;
  VectorXd tfidf;
  if (c.context != ContextMode::None && ctx_present) ctx_x = gather(embeddings_, b.context_tokens);
  switch (c.context) {
    case ContextMode::None:
      break;
    case ContextMode::Rnn:
      if (ctx_present) {
        lstm_forward({P("ctx.rnn.Wx"), P("ctx.rnn.Wh"), P("ctx.rnn.b")}, ctx_x, VectorXd::Zero(hdim),
                     false, ctx_tape);
        if (c.architecture == Architecture::Cnn)
          ctx_vec = lstm_last(ctx_tape);
        else
          h_init = lstm_last(ctx_tape);
      }
      break;
    case ContextMode::Cnn:
      if (ctx_present) ctx_vec = conv_pool(P("ctx.cnn.K"), P("ctx.cnn.b"), ctx_x, ctx_conv);
      break;
    case ContextMode::Mean:
      if (ctx_present) ctx_vec = ctx_x.rowwise().mean();
      break;
    case ContextMode::Tfidf:
      if (ctx_present) {
        tfidf = VectorXd::Zero(embeddings_.cols());
        for (int id : b.context_tokens) tfidf(id) += 1.0;
        tfidf /= static_cast<double>(b.context_tokens.size());
        tfidf = tfidf.cwiseProduct(idf_);
        const double norm = tfidf.norm();
        if (norm > 0) tfidf /= norm;
        ctx_vec = P("ctx.tfidf.b").col(0);
        const MatrixXd& w = P("ctx.tfidf.W");
        for (int id : unique_ids(b.context_tokens)) ctx_vec += w.col(id) * tfidf(id);
      }
      break;
  }

  // Sentence encoder.
  LstmTape fwd, bwd;
  MatrixXd s, y;
  std::vector<Index> pool_arg;
  MatrixXd hcat, u;
  VectorXd attn;
  std::vector<ConvTape> convs;
  VectorXd pooled(ix(c.pooled_dim()));
  if (c.architecture != Architecture::Cnn) {
    lstm_forward({P("rnn.fwd.Wx"), P("rnn.fwd.Wh"), P("rnn.fwd.b")}, x, h_init, false, fwd);
    lstm_forward({P("rnn.bwd.Wx"), P("rnn.bwd.Wh"), P("rnn.bwd.b")}, x, h_init, true, bwd);
  }
  switch (c.architecture) {
    case Architecture::Rcnn: {
      s.resize(x.rows() + 2 * hdim, x.cols());
      s << x, fwd.h, bwd.h;
      y = ((P("rcnn.W") * s).colwise() + P("rcnn.b").col(0)).array().tanh().matrix();
      pool_arg.assign(static_cast<size_t>(y.rows()), 0);
      for (Index r = 0; r < y.rows(); ++r) pooled(r) = y.row(r).maxCoeff(&pool_arg[static_cast<size_t>(r)]);
      break;
    }
    case Architecture::BlstmAttention: {
      hcat.resize(2 * hdim, x.cols());
      hcat << fwd.h, bwd.h;
      u = ((P("attn.W") * hcat).colwise() + P("attn.b").col(0)).array().tanh().matrix();
      const VectorXd scores = u.transpose() * P("attn.v").col(0);
      attn = softmax(scores);
      pooled = hcat * attn;
      break;
    }
    case Architecture::Cnn: {
      convs.resize(c.cnn_widths.size());
      for (size_t i = 0; i < c.cnn_widths.size(); ++i) {
        const auto w = std::to_string(c.cnn_widths[i]);
        pooled.segment(ix(i * c.cnn_maps), ix(c.cnn_maps)) = conv_pool(P("cnn.K" + w), P("cnn.b" + w), x, convs[i]);
      }
      break;
    }
  }

  // Final vector: pooled | turn | sentiment | char | context.
  VectorXd fin(ix(c.final_dim()));
  Index off = 0;
  fin.segment(off, pooled.size()) = pooled;
  off += pooled.size();
  const Index turn_off = off;
  if (c.features.turn) {
    if (b.turn_position < 0 || static_cast<size_t>(b.turn_position) >= c.turn_buckets)
      throw ConfigError("turn position outside the embedding table");
    fin.segment(off, ix(c.turn_embed_dim)) = P("turn.E").col(b.turn_position);
    off += ix(c.turn_embed_dim);
  }
  if (c.features.sentiment) {
    fin.segment(off, 3) << b.sentiment.neg, b.sentiment.neu, b.sentiment.pos;
    off += 3;
  }
  const Index char_off = off;
  Eigen::Map<const VectorXd> chars(b.char_vector.data(), ix(b.char_vector.size()));
  if (c.features.character) {
    if (b.char_vector.size() != c.char_dim)
      throw ConfigError("character vector has dimension " + std::to_string(b.char_vector.size()));
    fin.segment(off, ix(c.char_proj_dim)) = P("char.W") * chars + P("char.b").col(0);
    off += ix(c.char_proj_dim);
  }
  const Index ctx_off = off;
  fin.segment(off, ctx_vec.size()) = ctx_vec;

  VectorXd mask;
  VectorXd dropped = fin;
  if (dropout_rng && c.dropout > 0) {
    std::bernoulli_distribution keep(1.0 - c.dropout);
    mask.resize(fin.size());
    for (Index i = 0; i < mask.size(); ++i) mask(i) = keep(*dropout_rng) ? 1.0 / (1.0 - c.dropout) : 0.0;
    dropped = fin.cwiseProduct(mask);
  }

  ForwardResult result;
  result.logits = P("out.W") * dropped + P("out.b").col(0);
  if (!result.logits.allFinite()) throw NumericError("non-finite logits in forward pass");
  result.probs = softmax(result.logits);
  result.final_vector = fin;
  result.attention = attn;

  if (label >= 0 && loss) *loss = -weight * std::log(std::max(result.probs(label), 1e-300));
  if (!backward) return result;

  // Output layer.
  VectorXd dlogits = result.probs;
  dlogits(label) -= 1.0;
  dlogits *= weight;
  G("out.W").noalias() += dlogits * dropped.transpose();
  G("out.b").col(0) += dlogits;
  VectorXd dfin = P("out.W").transpose() * dlogits;
  if (mask.size()) dfin = dfin.cwiseProduct(mask);

  if (c.features.turn) G("turn.E").col(b.turn_position) += dfin.segment(turn_off, ix(c.turn_embed_dim));
  if (c.features.character) {
    const VectorXd dproj = dfin.segment(char_off, ix(c.char_proj_dim));
    G("char.W").noalias() += dproj * chars.transpose();
    G("char.b").col(0) += dproj;
  }
  const VectorXd dctx = dfin.segment(ctx_off, ctx_vec.size());
  const VectorXd dpooled = dfin.head(pooled.size());

  VectorXd dh_init = VectorXd::Zero(hdim);
  switch (c.architecture) {
    case Architecture::Rcnn: {
      MatrixXd dy = MatrixXd::Zero(y.rows(), y.cols());
      for (Index r = 0; r < y.rows(); ++r) dy(r, pool_arg[static_cast<size_t>(r)]) = dpooled(r);
      const MatrixXd da = dy.cwiseProduct((1.0 - y.array().square()).matrix());
      G("rcnn.W").noalias() += da * s.transpose();
      G("rcnn.b").col(0) += da.rowwise().sum();
      const MatrixXd ds = P("rcnn.W").transpose() * da;
      const MatrixXd dhf = ds.middleRows(x.rows(), hdim);
      const MatrixXd dhb = ds.middleRows(x.rows() + hdim, hdim);
      dh_init += lstm_backward({P("rnn.fwd.Wx"), P("rnn.fwd.Wh"), P("rnn.fwd.b")}, fwd, dhf,
                               G("rnn.fwd.Wx"), G("rnn.fwd.Wh"), G("rnn.fwd.b"));
      dh_init += lstm_backward({P("rnn.bwd.Wx"), P("rnn.bwd.Wh"), P("rnn.bwd.b")}, bwd, dhb,
                               G("rnn.bwd.Wx"), G("rnn.bwd.Wh"), G("rnn.bwd.b"));
      break;
    }
    case Architecture::BlstmAttention: {
      MatrixXd dh = dpooled * attn.transpose();
      const VectorXd dattn = hcat.transpose() * dpooled;
      const VectorXd dscores = attn.cwiseProduct((dattn.array() - attn.dot(dattn)).matrix());
      const VectorXd& v = P("attn.v").col(0);
      G("attn.v").col(0) += u * dscores;
      const MatrixXd du = (v * dscores.transpose()).cwiseProduct((1.0 - u.array().square()).matrix());
      G("attn.W").noalias() += du * hcat.transpose();
      G("attn.b").col(0) += du.rowwise().sum();
      dh.noalias() += P("attn.W").transpose() * du;
      dh_init += lstm_backward({P("rnn.fwd.Wx"), P("rnn.fwd.Wh"), P("rnn.fwd.b")}, fwd, dh.topRows(hdim),
                               G("rnn.fwd.Wx"), G("rnn.fwd.Wh"), G("rnn.fwd.b"));
      dh_init += lstm_backward({P("rnn.bwd.Wx"), P("rnn.bwd.Wh"), P("rnn.bwd.b")}, bwd,
                               dh.bottomRows(hdim), G("rnn.bwd.Wx"), G("rnn.bwd.Wh"), G("rnn.bwd.b"));
      break;
    }
    case Architecture::Cnn:
      for (size_t i = 0; i < c.cnn_widths.size(); ++i) {
        const auto w = std::to_string(c.cnn_widths[i]);
        conv_pool_backward(convs[i], dpooled.segment(ix(i * c.cnn_maps), ix(c.cnn_maps)), G("cnn.K" + w),
                           G("cnn.b" + w));
      }
      break;
  }

  if (!ctx_present) return result;
  switch (c.context) {
    case ContextMode::None:
    case ContextMode::Mean:
      break;
    case ContextMode::Rnn: {
      MatrixXd dhc = MatrixXd::Zero(hdim, ctx_x.cols());
      dhc.col(ctx_x.cols() - 1) = c.architecture == Architecture::Cnn ? dctx : dh_init;
      lstm_backward({P("ctx.rnn.Wx"), P("ctx.rnn.Wh"), P("ctx.rnn.b")}, ctx_tape, dhc, G("ctx.rnn.Wx"),
                    G("ctx.rnn.Wh"), G("ctx.rnn.b"));
      break;
    }
    case ContextMode::Cnn:
      conv_pool_backward(ctx_conv, dctx, G("ctx.cnn.K"), G("ctx.cnn.b"));
      break;
    case ContextMode::Tfidf:
      for (int id : unique_ids(b.context_tokens)) G("ctx.tfidf.W").col(id) += dctx * tfidf(id);
      G("ctx.tfidf.b").col(0) += dctx;
      break;
  }
  return result;
}

Prediction predict(const FeatureBundle& bundle, const Model& model) {
  const auto r = model.forward(bundle);
  if (!r.probs.allFinite()) throw NumericError("predict: non-finite probabilities");
  return {label_at(argmax(r.probs)), r.probs};
}

Prediction predict(const Sentence& sentence, const Dialogue& dialogue, const Model& model,
                   const FeatureTables& tables) {
  return predict(featurize(sentence, dialogue, tables), model);
}

MajorityClassifier majority_predict(std::span<const StrategyLabel> train_labels,
                                    bool exclude_non_strategy) {
  if (train_labels.empty()) throw EmptyInputError("majority_predict: no training labels");
  std::array<size_t, kNumLabels> counts{};
  for (auto l : train_labels) ++counts[index_of(l)];
  size_t best = kNumLabels;
  for (size_t i = 0; i < kNumLabels; ++i) {
    if (exclude_non_strategy && label_at(i) == StrategyLabel::NonStrategy) continue;
    if (counts[i] == 0) continue;
    if (best == kNumLabels || counts[i] > counts[best]) best = i;
  }
  if (best == kNumLabels) best = index_of(StrategyLabel::NonStrategy);
  return {label_at(best)};
}

}  // namespace p4g
