#include "p4g/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include "p4g/checkpoint.hpp"
#include "p4g/config.hpp"
#include "p4g/corpus.hpp"
#include "p4g/csv.hpp"
#include "p4g/error.hpp"
#include "p4g/features.hpp"
#include "p4g/log.hpp"
#include "p4g/model.hpp"
#include "p4g/outcomes.hpp"
#include "p4g/reliability.hpp"
#include "p4g/text.hpp"
#include "p4g/train_eval.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace p4g::cli {

namespace {

// Options shared by every subcommand. Flags land in the config under the
// key of the same name and override the config file.
struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flags;
  bool quiet = false;
};

struct Context {
  KeyValueConfig cfg;
  std::ostream& out;
  std::ostream& err;
  bool quiet = false;

  std::string hash() const { return hex64(cfg.hash()); }

  fs::path out_dir() const {
    fs::path dir = cfg.get_or("out", "p4g_out");
    fs::create_directories(dir);
    return dir;
  }

  std::string require(std::string_view key) const {
    auto v = cfg.get(key);
    if (!v || v->empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
    return *v;
  }

  void write(const fs::path& path, const std::string& body) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << "# config_hash=" << hash() << "\n" << body;
    if (!f) throw Error("error writing " + path.string());
  }

  void write_json(const fs::path& path, json j) const {
    j["config_hash"] = hash();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << "\n";
  }
};

void add_common(CLI::App* app, Common& c, bool corpus = true) {
  app->add_option("--config", c.config_file, "key=value configuration file");
  app->add_option("--set", c.overrides, "override a configuration key (key=value)")->take_all();
  app->add_option_function<std::string>("--out", [&c](const std::string& v) { c.flags["out"] = v; },
                                         "output directory");
  app->add_flag("--quiet", c.quiet, "suppress warnings on stderr");
  if (!corpus) return;
  app->add_option_function<std::string>("--corpus", [&c](const std::string& v) { c.flags["corpus"] = v; },
                                         "dialogue CSV");
  app->add_option_function<std::string>("--profiles", [&c](const std::string& v) { c.flags["profiles"] = v; },
                                         "participant profile CSV");
  app->add_option_function<std::string>("--columns", [&c](const std::string& v) { c.flags["columns"] = v; },
                                         "column map (key=value)");
  app->add_option_function<std::string>("--basis", [&c](const std::string& v) { c.flags["basis"] = v; },
                                         "donation basis: actual or promised");
}

KeyValueConfig resolve_config(const Common& c) {
  KeyValueConfig cfg;
  if (!c.config_file.empty()) cfg = KeyValueConfig::load(c.config_file);
  for (const auto& [k, v] : c.flags) cfg.set(k, v);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + o + "'");
    cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  return cfg;
}

DonationBasis basis_of(const KeyValueConfig& cfg) {
  const auto b = cfg.get_or("basis", "actual");
  if (b == "actual") return DonationBasis::Actual;
  if (b == "promised") return DonationBasis::Promised;
  throw ConfigError("basis must be 'actual' or 'promised', got '" + b + "'");
}

Corpus load_corpus(const Context& ctx) {
  const auto dialogues = ctx.require("corpus");
  const auto profiles = ctx.require("profiles");
  ColumnMap columns;
  if (auto path = ctx.cfg.get("columns"); path && !path->empty()) columns = ColumnMap::load(*path);
  IngestOptions opts;
  opts.payment_cap = ctx.cfg.get_double("payment_cap", opts.payment_cap);
  opts.strict = ctx.cfg.get_bool("strict", false);
  auto result = ingest(dialogues, profiles, columns, opts);
  constexpr size_t kShown = 20;
  for (size_t i = 0; i < result.errors.size() && i < kShown; ++i) {
    const auto& e = result.errors[i];
    log::warn(e.file + ":" + std::to_string(e.line) + ": " + e.field + ": " + e.message);
  }
  if (result.errors.size() > kShown)
    log::warn(std::to_string(result.errors.size()) + " rows skipped in total");
  for (size_t i = 0; i < result.warnings.size() && i < kShown; ++i) log::warn(result.warnings[i]);
  if (result.warnings.size() > kShown)
    log::warn(std::to_string(result.warnings.size()) + " ingestion warnings in total");
  return std::move(result.corpus);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- feature resources ---------------------------------------------------

struct Resources {
  Vocabulary vocab;
  Eigen::MatrixXd embeddings;
  SentimentLexicon lexicon;
  std::unique_ptr<CharEncoder> encoder;
  FeatureTables tables;
};

std::unique_ptr<CharEncoder> make_encoder(const KeyValueConfig& cfg) {
  if (auto path = cfg.get("char_vectors"); path && !path->empty()) return PrecomputedCharEncoder::load(*path);
  return std::make_unique<HashedTrigramEncoder>(cfg.get_bool("char_pad", true),
                                                static_cast<size_t>(cfg.get_int("model.char_dim", kCharDim)));
}

SentimentLexicon make_lexicon(const KeyValueConfig& cfg) {
  if (auto path = cfg.get("lexicon"); path && !path->empty()) return SentimentLexicon::load(*path);
  log::warn("no sentiment lexicon configured; every token is neutral");
  return {};
}

TurnPositionMode turn_mode_of(const KeyValueConfig& cfg) {
  const auto m = cfg.get_or("turn_mode", "clip");
  if (m == "clip") return TurnPositionMode::Clip;
  if (m == "relative") return TurnPositionMode::Relative;
  throw ConfigError("turn_mode must be 'clip' or 'relative', got '" + m + "'");
}

void bind_tables(Resources& r, const KeyValueConfig& cfg) {
  r.tables.vocab = &r.vocab;
  r.tables.lexicon = &r.lexicon;
  r.tables.encoder = r.encoder.get();
  r.tables.t_max = static_cast<int>(cfg.get_int("t_max", kDefaultTurnMax));
  if (r.tables.t_max < 0) throw ConfigError("t_max must be >= 0");
  r.tables.turn_mode = turn_mode_of(cfg);
}

// Stand-in vectors for runs without a pretrained embedding file.
Eigen::MatrixXd random_embeddings(size_t dim, size_t vocab, uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xe3b0c442ULL);
  std::normal_distribution<double> n(0.0, 0.1);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vocab));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n(rng);
  m.col(0).setZero();
  return m;
}

std::unique_ptr<Resources> training_resources(const Context& ctx, const Corpus& corpus, ModelConfig& base) {
  auto r = std::make_unique<Resources>();
  r->vocab = Vocabulary::from_corpus(corpus);
  if (auto path = ctx.cfg.get("embeddings"); path && !path->empty()) {
    const size_t expected = ctx.cfg.has("model.word_dim") ? base.word_dim : 0;
    auto table = EmbeddingTable::load(*path, expected, &corpus.vocabulary());
    const auto oov = ctx.cfg.get_or("oov", "zero");
    if (oov == "mean") table.set_oov_policy(OovPolicy::Mean);
    else if (oov != "zero") throw ConfigError("oov must be 'zero' or 'mean', got '" + oov + "'");
    r->embeddings = embedding_matrix(r->vocab, table);
    base.word_dim = table.dimension();
  } else {
    log::warn("no word embeddings configured; using random vectors");
    r->embeddings = random_embeddings(base.word_dim, r->vocab.size(),
                                      static_cast<uint64_t>(ctx.cfg.get_int("train.seed", 1)));
  }
  r->lexicon = make_lexicon(ctx.cfg);
  r->encoder = make_encoder(ctx.cfg);
  base.char_dim = r->encoder->dimension();
  bind_tables(*r, ctx.cfg);
  base.turn_buckets = static_cast<size_t>(r->tables.t_max) + 1;
  base.validate();
  return r;
}

// Feature settings stored with a checkpoint so eval/predict rebuild the
// same inputs.
void feature_metadata(const KeyValueConfig& cfg, KeyValueConfig& meta) {
  for (const char* k : {"lexicon", "char_vectors", "char_pad", "t_max", "turn_mode"})
    if (auto v = cfg.get(k)) meta.set(std::string("features.") + k, *v);
}

std::unique_ptr<Resources> checkpoint_resources(const Context& ctx, const Checkpoint& ckpt) {
  KeyValueConfig feat;
  for (const auto& [k, v] : ckpt.metadata.values())
    if (k.starts_with("features.")) feat.set(k.substr(9), v);
  for (const char* k : {"lexicon", "char_vectors", "char_pad", "t_max", "turn_mode"})
    if (auto v = ctx.cfg.get(k)) feat.set(k, *v);
  feat.set("model.char_dim", std::to_string(ckpt.model.config().char_dim));
  auto r = std::make_unique<Resources>();
  r->vocab = ckpt.vocab;
  r->lexicon = make_lexicon(feat);
  r->encoder = make_encoder(feat);
  if (ckpt.model.config().features.character && r->encoder->dimension() != ckpt.model.config().char_dim)
    throw ConfigError("character encoder dimension differs from the checkpoint");
  bind_tables(*r, feat);
  return r;
}

std::vector<Example> require_examples(const Corpus& corpus, const FeatureTables& tables) {
  auto examples = build_examples(corpus, tables);
  if (examples.empty()) throw EmptyInputError("no labeled persuader sentences in the annotated dialogues");
  return examples;
}

json report_json(const EvalReport& r) {
  json j;
  j["fold"] = r.fold;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  json classes = json::array();
  for (size_t i = 0; i < kNumLabels; ++i) {
    const auto& c = r.per_class[i];
    classes.push_back({{"label", key(label_at(i))},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
  }
  j["per_class"] = classes;
  json conf = json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  return j;
}

// ---- subcommands ---------------------------------------------------------

int cmd_stats(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  const auto s = corpus_stats(corpus, basis_of(ctx.cfg));
  const auto dir = ctx.out_dir();
  const auto table = format_stats_table(s);
  ctx.write(dir / "stats.txt", table);
  ctx.write(dir / "stats.kv", format_stats_kv(s));
  ctx.out << table;
  return 0;
}

int cmd_counts(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  const auto counts = strategy_counts(corpus);
  std::ostringstream csv, text;
  csv << "label,count\n";
  size_t total = 0, strategies = 0;
  for (size_t i = 0; i < kNumLabels; ++i) {
    csv << key(label_at(i)) << ',' << counts[i] << '\n';
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-24s %6zu\n", std::string(display_name(label_at(i))).c_str(), counts[i]);
    text << buf;
    total += counts[i];
    if (label_at(i) != StrategyLabel::NonStrategy) strategies += counts[i];
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-24s %6zu\n%-24s %6zu\n", "Strategies", strategies, "Total", total);
  text << buf;
  const auto dir = ctx.out_dir();
  ctx.write(dir / "strategy_counts.csv", csv.str());
  ctx.write(dir / "strategy_counts.txt", text.str());
  ctx.out << text.str();
  return 0;
}

// Plot data: per-turn strategy histograms and Big-Five means by donation.
void write_distributions(Context& ctx, const Corpus& corpus, const fs::path& dir, const std::string& label_sel,
                         int max_turn) {
  std::vector<StrategyLabel> labels;
  if (label_sel == "all") {
    for (size_t i = 0; i < kNumLabels; ++i) labels.push_back(label_at(i));
  } else {
    auto l = parse_strategy_key(label_sel);
    if (!l) throw ConfigError("unknown strategy label '" + label_sel + "'");
    labels.push_back(*l);
  }
  std::ostringstream hist;
  hist << "label,turn,count\n";
  for (auto l : labels) {
    const auto h = turn_histogram(corpus, l, max_turn);
    for (size_t t = 0; t < h.size(); ++t) hist << key(l) << ',' << t << ',' << h[t] << '\n';
  }
  ctx.write(dir / "turn_histogram.csv", hist.str());

  try {
    const auto split = trait_means_by_donation(corpus, basis_of(ctx.cfg));
    std::ostringstream means;
    means << "trait,donated,not_donated,n_donated,n_not_donated\n";
    for (size_t k = 0; k < kBigFive.size(); ++k)
      means << kBigFive[k] << ',' << fixed(split.mean_donated[k], 6) << ',' << fixed(split.mean_not_donated[k], 6)
            << ',' << split.n_donated << ',' << split.n_not_donated << '\n';
    ctx.write(dir / "trait_means.csv", means.str());
  } catch (const DomainError& e) {
    log::warn(std::string("trait means skipped: ") + e.what());
  }
}

int cmd_dist(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  const auto dir = ctx.out_dir();
  write_distributions(ctx, corpus, dir, ctx.cfg.get_or("label", "all"),
                      static_cast<int>(ctx.cfg.get_int("max_turn", 10)));
  ctx.out << "wrote " << (dir / "turn_histogram.csv").string() << "\n";
  return 0;
}

int cmd_alpha(Context& ctx) {
  const auto matrix = CodingMatrix::load_csv(ctx.require("input"));
  const double overall = alpha_nominal(matrix);
  std::ostringstream text;
  text << "items " << matrix.items.size() << ", coders " << matrix.coders.size() << "\n";
  text << "alpha (nominal) " << fixed(overall, 4) << "\n";
  for (const auto& [cat, a] : alpha_per_category(matrix))
    text << "  " << cat << " " << (a ? fixed(*a, 4) : std::string("undefined")) << "\n";
  ctx.write(ctx.out_dir() / "alpha.txt", text.str());
  ctx.out << text.str();
  return 0;
}

int cmd_featurize(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  auto base = read_model_config(ctx.cfg);
  auto res = training_resources(ctx, corpus, base);
  const auto examples = require_examples(corpus, res->tables);
  std::ostringstream csv;
  csv << "id,label,tokens,unknown,turn_position,neg,neu,pos,context_tokens,char_nonzero\n";
  for (const auto& e : examples) {
    const auto& f = e.features;
    const auto unknown = std::count(f.token_ids.begin(), f.token_ids.end(), 0);
    const auto nonzero = std::count_if(f.char_vector.begin(), f.char_vector.end(), [](double v) { return v != 0; });
    csv << e.id << ',' << key(e.label) << ',' << f.token_ids.size() << ',' << unknown << ',' << f.turn_position
        << ',' << fixed(f.sentiment.neg, 6) << ',' << fixed(f.sentiment.neu, 6) << ',' << fixed(f.sentiment.pos, 6)
        << ',' << f.context_tokens.size() << ',' << nonzero << '\n';
  }
  ctx.write(ctx.out_dir() / "features.csv", csv.str());
  ctx.out << examples.size() << " examples\n";
  return 0;
}

int cmd_train(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  auto base = read_model_config(ctx.cfg);
  auto res = training_resources(ctx, corpus, base);
  const auto tc = read_train_config(ctx.cfg);
  const auto examples = require_examples(corpus, res->tables);

  const auto all_rows = standard_rows(base);
  std::vector<AblationRow> rows;
  const auto sel = ctx.cfg.get_or("row", "all_features");
  if (sel == "all") {
    rows = all_rows;
  } else {
    std::stringstream ss(sel);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!trim(name).empty()) rows.push_back(find_row(all_rows, trim(name)));
  }
  if (rows.empty()) throw ConfigError("no ablation row selected");

  const auto folds = kfold_split(examples, tc.k_folds, tc.split_unit, tc.seed);
  const auto dir = ctx.out_dir();
  ctx.write(dir / "run.cfg", ctx.cfg.canonical());
  const bool final_model = ctx.cfg.get_bool("train.final", true);
  std::vector<CvRow> results;
  for (const auto& row : rows) {
    if (!ctx.quiet) ctx.err << "training " << row.name << "\n";
    auto cv = cross_validate_row(examples, folds, row, res->embeddings, tc);
    const auto row_dir = dir / row.name;
    fs::create_directories(row_dir);
    for (const auto& f : cv.folds) {
      auto j = report_json(f);
      j["row"] = row.name;
      j["display"] = row.display;
      j["k_folds"] = folds.size();
      j["n_test"] = folds[static_cast<size_t>(f.fold)].size();
      ctx.write_json(row_dir / ("fold" + std::to_string(f.fold) + ".json"), j);
    }
    if (final_model && row.kind == RowKind::Model) {
      ExampleRefs refs;
      for (const auto& e : examples) refs.push_back(&e);
      auto trained = train_fold(refs, row.model, res->embeddings, tc);
      KeyValueConfig meta;
      meta.set("config_hash", ctx.hash());
      meta.set("row", row.name);
      write_train_config(tc, meta);
      feature_metadata(ctx.cfg, meta);
      save_checkpoint((row_dir / "model.ckpt").string(), trained.model, res->vocab, meta);
    }
    results.push_back(std::move(cv));
  }
  const auto table = format_ablation_table(results);
  ctx.write(dir / "ablation.txt", table);
  ctx.out << table;
  return 0;
}

int cmd_eval(Context& ctx) {
  const auto ckpt = load_checkpoint(ctx.require("checkpoint"));
  const auto corpus = load_corpus(ctx);
  auto res = checkpoint_resources(ctx, ckpt);
  const auto examples = require_examples(corpus, res->tables);
  ExampleRefs refs;
  for (const auto& e : examples) refs.push_back(&e);
  const auto report = evaluate(ckpt.model, refs);
  const auto dir = ctx.out_dir();
  auto j = report_json(report);
  j["checkpoint"] = ctx.require("checkpoint");
  j["n_test"] = refs.size();
  ctx.write_json(dir / "eval.json", j);
  ctx.write(dir / "confusion.csv", confusion_csv(report.confusion));
  ctx.out << "accuracy " << fixed(100 * report.accuracy, 1) << "%  macro F1 " << fixed(100 * report.macro_f1, 1)
          << "%  (" << refs.size() << " sentences)\n";
  return 0;
}

int cmd_predict(Context& ctx) {
  const auto ckpt = load_checkpoint(ctx.require("checkpoint"));
  auto res = checkpoint_resources(ctx, ckpt);
  const auto text = ctx.require("text");
  const int turn = static_cast<int>(ctx.cfg.get_int("turn", 0));
  Dialogue d;
  d.id = "input";
  const auto context = ctx.cfg.get_or("context", "");
  if (!context.empty()) {
    Turn t{turn, Role::Persuadee, {}};
    t.sentences.push_back({d.id, turn, 0, Role::Persuadee, context, tokenize(context), {}});
    d.turns.push_back(std::move(t));
  }
  Sentence s{d.id, turn, 0, Role::Persuader, text, tokenize(text), {}};
  d.turns.push_back({turn, Role::Persuader, {s}});
  if (s.tokens.empty()) throw DomainError("input text has no tokens");
  const auto p = predict(s, d, ckpt.model, res->tables);
  ctx.out << key(p.label) << "\n";
  std::vector<size_t> order(kNumLabels);
  for (size_t i = 0; i < kNumLabels; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p.probs[a] > p.probs[b]; });
  for (size_t i : order) ctx.out << "  " << key(label_at(i)) << " " << fixed(p.probs[static_cast<Eigen::Index>(i)], 4) << "\n";
  return 0;
}

OutcomeOptions outcome_options(const KeyValueConfig& cfg) {
  OutcomeOptions o;
  o.presence = cfg.get_bool("presence", false);
  o.dedup = cfg.get_bool("dedup", true);
  o.basis = basis_of(cfg);
  return o;
}

std::string fit_notes(const GlmResult& fit) {
  std::ostringstream out;
  out << "n " << fit.n << ", log-likelihood " << fixed(fit.log_likelihood, 4) << ", iterations " << fit.iterations
      << (fit.converged ? "" : ", NOT CONVERGED") << "\n";
  for (size_t i = 0; i < fit.pruned.dropped.size(); ++i)
    out << "pruned " << fit.pruned.dropped[i] << " (" << fit.pruned.reasons[i] << ")\n";
  for (const auto& d : fit.diverging) out << "diverging " << d << "\n";
  return out.str();
}

void run_analyses(Context& ctx, const Corpus& corpus, const fs::path& dir, const std::string& which,
                  const std::string& blocks) {
  const auto opts = outcome_options(ctx.cfg);
  const auto annset = corpus.annotated_subset();
  const bool all = which == "all";
  bool matched = false;
  auto emit = [&](const std::string& name, const std::string& title, const GlmResult& fit,
                  const std::string& extra = "") {
    const auto text = title + "\n" + fit_notes(fit) + extra + format_coefficients(fit.coefficients);
    ctx.write(dir / ("analysis_" + name + ".txt"), text);
    ctx.write(dir / ("analysis_" + name + ".csv"), coefficients_csv(fit.coefficients));
    ctx.out << text << "\n";
    for (const auto& d : fit.pruned.dropped) log::warn(name + ": pruned column " + d);
    if (!fit.converged) log::warn(name + ": fit did not converge");
  };
  if (all || which == "strategy") {
    matched = true;
    emit("strategy", "Strategies and donation (annotated dialogues)", strategy_model(annset, opts));
  }
  if (all || which == "profile") {
    matched = true;
    const auto pd = profile_design(corpus, opts);
    if (pd.dropped_rows) log::warn("profile: " + std::to_string(pd.dropped_rows) + " records with missing answers dropped");
    emit("profile", "Psychological profile and donation (all dialogues)", fit_logit(pd.design));
  }
  if (all || which == "interaction") {
    matched = true;
    std::stringstream ss(blocks);
    std::string b;
    while (std::getline(ss, b, ',')) {
      if (trim(b).empty()) continue;
      const auto block = parse_trait_block(trim(b));
      std::ostringstream text, csv;
      csv << "trait,predictor,coefficient,se,z,p,stars\n";
      for (const auto& f : interaction_model(annset, block, opts)) {
        text << "== " << f.trait << "\n" << fit_notes(f.fit) << format_coefficients(f.interactions, false) << "\n";
        for (const auto& c : f.interactions)
          csv << f.trait << ',' << c.name << ',' << fixed(c.beta, 6) << ',' << fixed(c.se, 6) << ',' << fixed(c.z, 4)
              << ',' << c.p << ',' << c.stars << '\n';
      }
      const auto name = "interaction_" + std::string(key(block));
      ctx.write(dir / ("analysis_" + name + ".txt"), text.str());
      ctx.write(dir / ("analysis_" + name + ".csv"), csv.str());
      ctx.out << "Trait x strategy interactions (" << key(block) << ")\n" << text.str();
    }
  }
  if (all || which == "inconsistency") {
    matched = true;
    const auto r = inconsistency_model(annset, opts);
    const auto& s = r.summary;
    std::ostringstream extra;
    extra << "agreed " << s.agreed << ": reduced " << s.reduced << " (" << fixed(s.pct_reduced, 1) << "%), zero "
          << s.zero << " (" << fixed(s.pct_zero, 1) << "%), increased " << s.increased << " ("
          << fixed(s.pct_increased, 1) << "%)\n";
    emit("inconsistency", "Big-Five and inconsistent donation", r.fit, extra.str());
  }
  if (!matched) throw ConfigError("unknown analysis '" + which + "' (strategy, profile, interaction, inconsistency, all)");
}

int cmd_analyze(Context& ctx) {
  const auto corpus = load_corpus(ctx);
  run_analyses(ctx, corpus, ctx.out_dir(), ctx.cfg.get_or("model", "all"),
               ctx.cfg.get_or("blocks", "big5,moral,decision"));
  return 0;
}

struct RowFolds {
  std::string name;
  std::string display;
  size_t expected = 0;
  std::vector<EvalReport> folds;
};

EvalReport read_fold(const fs::path& path, RowFolds& row) {
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    row.display = j.at("display").get<std::string>();
    row.expected = std::max(row.expected, j.at("k_folds").get<size_t>());
    ConfusionMatrix m{};
    const auto& conf = j.at("confusion");
    if (conf.size() != kNumLabels) throw FormatError(path.string() + ": confusion matrix is not 11x11");
    for (size_t i = 0; i < kNumLabels; ++i) {
      if (conf[i].size() != kNumLabels) throw FormatError(path.string() + ": confusion matrix is not 11x11");
      for (size_t k = 0; k < kNumLabels; ++k) m[i][k] = conf[i][k].get<size_t>();
    }
    return make_report(m, j.at("fold").get<int>());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

int cmd_report(Context& ctx) {
  const fs::path run = ctx.require("run");
  if (!fs::is_directory(run)) throw Error("run directory " + run.string() + " does not exist");
  std::vector<RowFolds> rows;
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(run))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(sub)) {
      const auto name = f.path().filename().string();
      if (name.starts_with("fold") && f.path().extension() == ".json") files.push_back(f.path());
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    RowFolds row;
    row.name = sub.filename().string();
    for (const auto& f : files) row.folds.push_back(read_fold(f, row));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInputError("no fold reports under " + run.string());

  // Known rows in grid order, anything else after them by name.
  const auto grid = standard_rows();
  auto rank = [&](const std::string& name) {
    for (size_t i = 0; i < grid.size(); ++i)
      if (grid[i].name == name) return i;
    return grid.size();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const RowFolds& a, const RowFolds& b) {
    return rank(a.name) < rank(b.name);
  });

  const fs::path dir = ctx.cfg.has("out") ? ctx.out_dir() : run / "report";
  fs::create_directories(dir);
  std::vector<CvRow> table_rows;
  std::ostringstream summary;
  summary << "row,display,accuracy,macro_f1,folds,expected_folds,partial\n";
  for (const auto& r : rows) {
    CvRow cv{r.name, r.display, 0, 0, r.folds};
    ConfusionMatrix pooled{};
    for (const auto& f : r.folds) {
      cv.accuracy += f.accuracy / static_cast<double>(r.folds.size());
      cv.macro_f1 += f.macro_f1 / static_cast<double>(r.folds.size());
      for (size_t i = 0; i < kNumLabels; ++i)
        for (size_t k = 0; k < kNumLabels; ++k) pooled[i][k] += f.confusion[i][k];
    }
    const bool partial = r.folds.size() < r.expected;
    if (partial) {
      log::warn(r.name + ": only " + std::to_string(r.folds.size()) + " of " + std::to_string(r.expected) +
                " folds present; averaging what exists");
      cv.display += " [partial " + std::to_string(r.folds.size()) + "/" + std::to_string(r.expected) + "]";
    }
    summary << csv::quote(r.name) << ',' << csv::quote(r.display) << ',' << fixed(cv.accuracy, 6) << ','
        << fixed(cv.macro_f1, 6) << ',' << r.folds.size() << ',' << r.expected << ',' << (partial ? 1 : 0) << '\n';
    ctx.write(dir / ("confusion_" + r.name + ".csv"), confusion_csv(pooled));
    table_rows.push_back(std::move(cv));
  }
  const auto table = format_ablation_table(table_rows);
  ctx.write(dir / "ablation.txt", table);
  ctx.write(dir / "ablation.csv", summary.str());
  ctx.out << table;

  if (ctx.cfg.has("corpus")) {
    const auto corpus = load_corpus(ctx);
    write_distributions(ctx, corpus, dir, "all", static_cast<int>(ctx.cfg.get_int("max_turn", 10)));
    run_analyses(ctx, corpus, dir, ctx.cfg.get_or("model", "all"), ctx.cfg.get_or("blocks", "big5,moral,decision"));
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persuasion dialogue corpus, strategy classifier and donation analyses", "p4g"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  using Handler = int (*)(Context&);
  struct Sub {
    CLI::App* app;
    Handler run;
    Common common;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](const char* name, const char* help, Handler run, bool corpus = true) -> Sub& {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->run = run;
    add_common(s->app, s->common, corpus);
    subs.push_back(std::move(s));
    return *subs.back();
  };
  auto flag_opt = [](Sub& s, const char* opt, const char* key, const char* help) {
    s.app->add_option_function<std::string>(opt, [&s, key](const std::string& v) { s.common.flags[key] = v; }, help);
  };

  add("stats", "corpus statistics table", cmd_stats);
  add("counts", "strategy counts over annotated persuader sentences", cmd_counts);
  auto& dist = add("dist", "per-turn strategy histograms and trait means (plot CSVs)", cmd_dist);
  flag_opt(dist, "--label", "label", "strategy key or 'all'");
  flag_opt(dist, "--max-turn", "max_turn", "last histogram bucket");
  auto& alpha = add("alpha", "Krippendorff's alpha from item_id,coder_id,label rows", cmd_alpha, false);
  flag_opt(alpha, "--input", "input", "coding CSV");
  auto& feat = add("featurize", "dump per-sentence features", cmd_featurize);
  auto& train = add("train", "cross-validate ablation rows and save checkpoints", cmd_train);
  auto& eval = add("eval", "evaluate a checkpoint on the annotated dialogues", cmd_eval);
  auto& pred = add("predict", "classify one persuader sentence", cmd_predict, false);
  auto& analyze = add("analyze", "logistic-regression donation analyses", cmd_analyze);
  auto& report = add("report", "aggregate fold reports into tables", cmd_report);
  for (Sub* s : {&feat, &train}) {
    flag_opt(*s, "--embeddings", "embeddings", "word vectors (text format)");
    flag_opt(*s, "--lexicon", "lexicon", "sentiment lexicon (token TAB valence)");
    flag_opt(*s, "--char-vectors", "char_vectors", "precomputed character vectors");
  }
  flag_opt(train, "--row", "row", "ablation row name(s), comma separated, or 'all'");
  flag_opt(train, "--jobs", "train.jobs", "folds trained concurrently");
  flag_opt(train, "--seed", "train.seed", "random seed");
  flag_opt(train, "--epochs", "train.epochs", "training epochs");
  for (Sub* s : {&eval, &pred}) {
    flag_opt(*s, "--checkpoint", "checkpoint", "model checkpoint");
    flag_opt(*s, "--lexicon", "lexicon", "override the checkpoint's lexicon path");
    flag_opt(*s, "--char-vectors", "char_vectors", "override the checkpoint's character vectors");
  }
  flag_opt(pred, "--text", "text", "persuader sentence");
  flag_opt(pred, "--context", "context", "preceding persuadee utterance");
  flag_opt(pred, "--turn", "turn", "turn index of the sentence");
  for (Sub* s : {&analyze, &report}) {
    flag_opt(*s, "--model", "model", "strategy, profile, interaction, inconsistency or all");
    flag_opt(*s, "--blocks", "blocks", "trait blocks for interactions (big5,moral,decision,schwartz)");
    s->app->add_flag_function("--presence", [s](int64_t) { s->common.flags["presence"] = "1"; },
                              "strategy presence instead of counts");
    s->app->add_flag_function("--no-dedup", [s](int64_t) { s->common.flags["dedup"] = "0"; },
                              "keep repeat participants");
  }
  flag_opt(report, "--run", "run", "directory written by train");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  for (const auto& s : subs) {
    if (!s->app->parsed()) continue;
    log::set_quiet(s->common.quiet);
    try {
      Context ctx{resolve_config(s->common), out, err, s->common.quiet};
      return s->run(ctx);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace p4g::cli
