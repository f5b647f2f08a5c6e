#include "p4g/config.hpp"

#include <fstream>
#include <sstream>

#include "p4g/error.hpp"
#include "p4g/text.hpp"
#include "p4g/train_eval.hpp"

namespace p4g {

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_or(std::string_view key, std::string fallback) const {
  return get(key).value_or(std::move(fallback));
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + std::string(key) + "': not a number: " + *v);
  }
}

long long KeyValueConfig::get_int(std::string_view key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const long long d = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + std::string(key) + "': not an integer: " + *v);
  }
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  const auto k = to_lower(*v);
  if (k == "1" || k == "true" || k == "yes" || k == "on") return true;
  if (k == "0" || k == "false" || k == "no" || k == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': not a boolean: " + *v);
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

uint64_t KeyValueConfig::hash() const { return fnv1a64(canonical()); }

namespace {

size_t get_size(const KeyValueConfig& in, std::string_view key, size_t fallback) {
  const long long v = in.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must be >= 0");
  return static_cast<size_t>(v);
}

std::string join_sizes(const std::vector<size_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<size_t> split_sizes(const std::string& s) {
  std::vector<size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(static_cast<size_t>(std::stoul(trim(item))));
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace

void write_model_config(const ModelConfig& c, KeyValueConfig& out) {
  out.set("model.architecture", std::string(key(c.architecture)));
  out.set("model.word_dim", std::to_string(c.word_dim));
  out.set("model.lstm_hidden", std::to_string(c.lstm_hidden));
  out.set("model.latent_dim", std::to_string(c.latent_dim));
  out.set("model.turn_buckets", std::to_string(c.turn_buckets));
  out.set("model.turn_embed_dim", std::to_string(c.turn_embed_dim));
  out.set("model.char_dim", std::to_string(c.char_dim));
  out.set("model.char_proj_dim", std::to_string(c.char_proj_dim));
  out.set("model.n_classes", std::to_string(c.n_classes));
  out.set("model.context", std::string(key(c.context)));
  out.set("model.context_cnn_maps", std::to_string(c.context_cnn_maps));
  out.set("model.context_cnn_width", std::to_string(c.context_cnn_width));
  out.set("model.tfidf_dim", std::to_string(c.tfidf_dim));
  out.set("model.attention_dim", std::to_string(c.attention_dim));
  out.set("model.cnn_widths", join_sizes(c.cnn_widths));
  out.set("model.cnn_maps", std::to_string(c.cnn_maps));
  out.set("model.dropout", fmt(c.dropout));
  out.set("model.feature.turn", c.features.turn ? "1" : "0");
  out.set("model.feature.sentiment", c.features.sentiment ? "1" : "0");
  out.set("model.feature.character", c.features.character ? "1" : "0");
}

ModelConfig read_model_config(const KeyValueConfig& in, ModelConfig c) {
  if (auto v = in.get("model.architecture")) c.architecture = parse_architecture(*v);
  c.word_dim = get_size(in, "model.word_dim", c.word_dim);
  c.lstm_hidden = get_size(in, "model.lstm_hidden", c.lstm_hidden);
  c.latent_dim = get_size(in, "model.latent_dim", c.latent_dim);
  c.turn_buckets = get_size(in, "model.turn_buckets", c.turn_buckets);
  c.turn_embed_dim = get_size(in, "model.turn_embed_dim", c.turn_embed_dim);
  c.char_dim = get_size(in, "model.char_dim", c.char_dim);
  c.char_proj_dim = get_size(in, "model.char_proj_dim", c.char_proj_dim);
  c.n_classes = get_size(in, "model.n_classes", c.n_classes);
  if (auto v = in.get("model.context")) c.context = parse_context_mode(*v);
  c.context_cnn_maps = get_size(in, "model.context_cnn_maps", c.context_cnn_maps);
  c.context_cnn_width = get_size(in, "model.context_cnn_width", c.context_cnn_width);
  c.tfidf_dim = get_size(in, "model.tfidf_dim", c.tfidf_dim);
  c.attention_dim = get_size(in, "model.attention_dim", c.attention_dim);
  if (auto v = in.get("model.cnn_widths")) c.cnn_widths = split_sizes(*v);
  c.cnn_maps = get_size(in, "model.cnn_maps", c.cnn_maps);
  c.dropout = in.get_double("model.dropout", c.dropout);
  c.features.turn = in.get_bool("model.feature.turn", c.features.turn);
  c.features.sentiment = in.get_bool("model.feature.sentiment", c.features.sentiment);
  c.features.character = in.get_bool("model.feature.character", c.features.character);
  c.validate();
  return c;
}

void write_train_config(const TrainConfig& c, KeyValueConfig& out) {
  out.set("train.lr0", fmt(c.lr0));
  out.set("train.decay_every", std::to_string(c.decay_every));
  out.set("train.decay_rate", fmt(c.decay_rate));
  out.set("train.batch_size", std::to_string(c.batch_size));
  out.set("train.epochs", std::to_string(c.epochs));
  out.set("train.seed", std::to_string(c.seed));
  out.set("train.k_folds", std::to_string(c.k_folds));
  out.set("train.split_unit", std::string(key(c.split_unit)));
  out.set("train.optimizer", std::string(key(c.optimizer)));
  out.set("train.momentum", fmt(c.momentum));
  out.set("train.class_weights", c.class_weights ? "1" : "0");
}

TrainConfig read_train_config(const KeyValueConfig& in) {
  TrainConfig c;
  c.lr0 = in.get_double("train.lr0", c.lr0);
  c.decay_every = get_size(in, "train.decay_every", c.decay_every);
  c.decay_rate = in.get_double("train.decay_rate", c.decay_rate);
  c.batch_size = get_size(in, "train.batch_size", c.batch_size);
  c.epochs = get_size(in, "train.epochs", c.epochs);
  c.seed = static_cast<uint64_t>(in.get_int("train.seed", static_cast<long long>(c.seed)));
  c.k_folds = get_size(in, "train.k_folds", c.k_folds);
  if (auto v = in.get("train.split_unit")) c.split_unit = parse_split_unit(*v);
  if (auto v = in.get("train.optimizer")) c.optimizer = parse_optimizer(*v);
  c.momentum = in.get_double("train.momentum", c.momentum);
  c.class_weights = in.get_bool("train.class_weights", c.class_weights);
  c.jobs = get_size(in, "train.jobs", c.jobs);
  c.validate();
  return c;
}

}  // namespace p4g
