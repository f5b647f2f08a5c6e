#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "p4g/corpus.hpp"
#include "p4g/error.hpp"
#include "p4g/text.hpp"
#include "synthetic.hpp"

using namespace p4g;
using p4g::testing::TempDir;
using p4g::testing::write_text;

namespace {

const char* kProfileHeader = "worker_id,dialogue_id,role,donation_actual,donation_promised,agreeable\n";

std::pair<std::string, std::string> write_pair(const TempDir& dir, const std::string& dialogues,
                                               const std::string& profiles) {
  write_text(dir / "d.csv", dialogues);
  write_text(dir / "p.csv", profiles);
  return {(dir / "d.csv").string(), (dir / "p.csv").string()};
}

bool same_number(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

TEST(Labels, ParseVariants) {
  EXPECT_EQ(parse_strategy_label("credibility-appeal"), StrategyLabel::CredibilityAppeal);
  EXPECT_EQ(parse_strategy_label("Credibility appeal"), StrategyLabel::CredibilityAppeal);
  EXPECT_EQ(parse_strategy_label("credibility_appeal"), StrategyLabel::CredibilityAppeal);
  EXPECT_EQ(parse_strategy_label("foot-in-the-door"), StrategyLabel::FootInTheDoor);
  EXPECT_EQ(parse_strategy_label("greeting"), StrategyLabel::NonStrategy);
  EXPECT_FALSE(parse_strategy_key("greeting").has_value());
  for (size_t i = 0; i < kNumLabels; ++i) {
    EXPECT_EQ(parse_strategy_label(key(label_at(i))), label_at(i));
    EXPECT_EQ(parse_strategy_label(display_name(label_at(i))), label_at(i));
  }
}

TEST(Labels, AppealAndInquiryPartition) {
  size_t appeals = 0, inquiries = 0;
  for (size_t i = 0; i < kNumStrategies; ++i) {
    appeals += is_appeal(label_at(i));
    inquiries += is_inquiry(label_at(i));
  }
  EXPECT_EQ(appeals, 7u);
  EXPECT_EQ(inquiries, 3u);
  EXPECT_FALSE(is_inquiry(StrategyLabel::NonStrategy));
}

TEST(Ingest, SingleDialogueThreeWordsPerSide) {
  TempDir dir;
  auto [d, p] = write_pair(dir,
                           "dialogue_id,turn,role,text\n"
                           "x,0,persuader,one two three\n"
                           "x,0,persuadee,four five six\n",
                           std::string(kProfileHeader) + "a,x,persuader,0,,3\nb,x,persuadee,0.3,,4\n");
  auto r = ingest(d, p);
  const auto s = corpus_stats(r.corpus);
  EXPECT_EQ(s.dialogues, 1u);
  EXPECT_EQ(s.participants, 2u);
  EXPECT_DOUBLE_EQ(s.mean_words_per_utterance, 3.0);
  EXPECT_DOUBLE_EQ(s.words_per_utterance[0], 3.0);
  EXPECT_DOUBLE_EQ(s.mean_turns, 1.0);
  EXPECT_DOUBLE_EQ(s.mean_donation, 0.3);
  EXPECT_EQ(s.unique_tokens, 6u);
  EXPECT_EQ(s.donated[1], 1u);
  EXPECT_EQ(s.not_donated[0], 1u);
  // Too few turns per side is only a warning.
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Ingest, SegmentsUtterancesWithoutSentenceIndex) {
  TempDir dir;
  auto [d, p] = write_pair(dir,
                           "dialogue_id,turn,role,text\n"
                           "x,0,persuader,Hi. How are you?\n"
                           "x,0,persuadee,Fine\n",
                           std::string(kProfileHeader) + "a,x,er,0,,\nb,x,ee,0,,\n");
  auto r = ingest(d, p);
  const auto& turn = r.corpus.dialogues().at(0).turns.at(0);
  ASSERT_EQ(turn.sentences.size(), 2u);
  EXPECT_EQ(turn.sentences[1].text, "How are you?");
  EXPECT_EQ(turn.sentences[1].sentence_index, 1);
}

TEST(Ingest, MissingRequiredColumnIsSchemaError) {
  TempDir dir;
  auto [d, p] = write_pair(dir, "dialogue_id,turn,role\nx,0,persuader\n", kProfileHeader);
  EXPECT_THROW(ingest(d, p), SchemaError);
}

TEST(Ingest, ColumnMapRenamesFields) {
  TempDir dir;
  auto [d, p] = write_pair(dir,
                           "conv,Turn,B4,Unit\n"
                           "x,0,0,hello there\n"
                           "x,0,1,hi\n",
                           std::string(kProfileHeader) + "a,x,persuader,0,,\nb,x,persuadee,0,,\n");
  ColumnMap m = ColumnMap::parse("dialogue_id=conv\nturn=Turn\nrole=B4\ntext=Unit\n");
  auto r = ingest(d, p, m);
  ASSERT_EQ(r.corpus.dialogues().size(), 1u);
  EXPECT_EQ(r.corpus.dialogues()[0].turns[1].role, Role::Persuadee);
}

TEST(Ingest, UnlinkedDialogueIsLinkError) {
  TempDir dir;
  auto [d, p] = write_pair(dir,
                           "dialogue_id,turn,role,text\nx,0,persuader,hi\ny,0,persuader,hey\n",
                           std::string(kProfileHeader) + "a,x,persuader,0,,\nb,x,persuadee,0,,\n");
  try {
    ingest(d, p);
    FAIL() << "expected LinkError";
  } catch (const LinkError& e) {
    EXPECT_NE(std::string(e.what()).find("y"), std::string::npos);
  }
}

TEST(Ingest, BadRowsCollectedOrStrict) {
  TempDir dir;
  auto [d, p] = write_pair(dir,
                           "dialogue_id,turn,role,text\nx,0,persuader,hi\nx,zz,persuadee,bad turn\n",
                           std::string(kProfileHeader) + "a,x,persuader,0,,\nb,x,persuadee,5.00,,\n"
                                                         "b,x,persuadee,0.5,,\n");
  auto r = ingest(d, p);
  ASSERT_EQ(r.errors.size(), 2u);  // over the payment cap, unparseable turn
  EXPECT_EQ(r.errors[0].field, "donation_actual");
  EXPECT_EQ(r.errors[0].line, 3u);
  EXPECT_EQ(r.errors[1].field, "turn");
  IngestOptions strict;
  strict.strict = true;
  EXPECT_THROW(ingest(d, p, {}, strict), ParseError);
}

TEST(Ingest, RoundTripThroughCanonicalFormat) {
  TempDir dir;
  const auto corpus = p4g::testing::make_corpus({.dialogues = 12, .annotated = 6, .repeat_workers = 2});
  auto [d, p] = p4g::testing::write_corpus(corpus, dir.path());
  auto back = ingest(d, p).corpus;
  ASSERT_EQ(back.dialogues().size(), corpus.dialogues().size());
  for (size_t i = 0; i < corpus.dialogues().size(); ++i) EXPECT_EQ(back.dialogues()[i], corpus.dialogues()[i]);
  ASSERT_EQ(back.profiles().size(), corpus.profiles().size());
  for (size_t i = 0; i < corpus.profiles().size(); ++i) {
    const auto& a = corpus.profiles()[i];
    const auto& b = back.profiles()[i];
    EXPECT_EQ(a.worker_id, b.worker_id);
    EXPECT_EQ(a.role, b.role);
    EXPECT_EQ(a.demographics.religion, b.demographics.religion);
    EXPECT_TRUE(same_number(a.demographics.age, b.demographics.age));
    const auto pa = a.psych_vector(), pb = b.psych_vector();
    for (size_t k = 0; k < kPsychDims; ++k) EXPECT_TRUE(same_number(pa[k], pb[k]));
    EXPECT_EQ(a.donation_promised, b.donation_promised);
    EXPECT_EQ(a.donation_actual, b.donation_actual);
  }
  EXPECT_EQ(back.vocabulary(), corpus.vocabulary());
}

TEST(Stats, MatchIndependentRecount) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 30, .annotated = 10});
  const auto s = corpus_stats(corpus);
  // Recount straight from the sentence texts.
  double words = 0, utts = 0, er_words = 0, er_utts = 0, turns = 0;
  for (const auto& d : corpus.dialogues()) {
    turns += static_cast<double>(d.turns.size()) / 2;
    for (const auto& t : d.turns) {
      double n = 0;
      for (const auto& sen : t.sentences)
        for (const auto& tok : tokenize(sen.text)) n += is_word(tok) ? 1 : 0;
      words += n;
      utts += 1;
      if (t.role == Role::Persuader) {
        er_words += n;
        er_utts += 1;
      }
    }
  }
  EXPECT_NEAR(s.mean_words_per_utterance, words / utts, 1e-9);
  EXPECT_NEAR(s.words_per_utterance[0], er_words / er_utts, 1e-9);
  EXPECT_NEAR(s.mean_turns, turns / 30.0, 1e-9);
  EXPECT_EQ(s.annotated, 10u);
}

TEST(Stats, EmptyCorpusThrows) { EXPECT_THROW(corpus_stats(Corpus{}), EmptyInputError); }

TEST(Counts, ConservationAcrossLabelsAndTurns) {
  const auto corpus = p4g::testing::make_corpus({.dialogues = 25, .annotated = 25, .exchanges = 14});
  const auto counts = strategy_counts(corpus);
  size_t labeled = 0;
  for (const auto& d : corpus.dialogues())
    for (const auto& t : d.turns)
      for (const auto& s : t.sentences) labeled += s.strategy().has_value();
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), size_t{0}), labeled);
  for (size_t i = 0; i < kNumLabels; ++i) {
    const auto h = turn_histogram(corpus, label_at(i), 10);
    EXPECT_EQ(h.size(), 11u);
    EXPECT_EQ(std::accumulate(h.begin(), h.end(), size_t{0}), counts[i]);
  }
}

TEST(Counts, SingleLabeledSentence) {
  Dialogue d{"x", {}, "a", "b", true};
  Sentence s{"x", 0, 0, Role::Persuader, "hi", {"hi"}, StrategyLabel::TaskInquiry};
  d.turns.push_back({0, Role::Persuader, {s}});
  const auto counts = strategy_counts(Corpus({d}, {}));
  for (size_t i = 0; i < kNumLabels; ++i)
    EXPECT_EQ(counts[i], label_at(i) == StrategyLabel::TaskInquiry ? 1u : 0u);
  EXPECT_THROW(strategy_counts(Corpus{}), EmptyInputError);
}

TEST(Histogram, FinalBucketAbsorbsLateTurns) {
  Dialogue d{"x", {}, "a", "b", true};
  for (int t : {0, 3, 7, 12}) {
    Sentence s{"x", t, 0, Role::Persuader, "hi", {"hi"}, StrategyLabel::LogicalAppeal};
    d.turns.push_back({t, Role::Persuader, {s}});
  }
  const auto h = turn_histogram(Corpus({d}, {}), StrategyLabel::LogicalAppeal, 5);
  EXPECT_EQ(h, (std::vector<size_t>{1, 0, 0, 1, 0, 2}));
  EXPECT_EQ(turn_histogram(Corpus{}, StrategyLabel::LogicalAppeal, 3), std::vector<size_t>(4, 0));
}

TEST(Dedup, FirstRowWinsAndIdempotent) {
  std::vector<ParticipantProfile> ps(5);
  const char* ids[] = {"w1", "w2", "w1", "w3", "w1"};
  for (size_t i = 0; i < 5; ++i) {
    ps[i].worker_id = ids[i];
    ps[i].dialogue_id = "d" + std::to_string(i);
  }
  const auto once = dedup_first_task(ps);
  ASSERT_EQ(once.size(), 3u);
  EXPECT_EQ(once[0].dialogue_id, "d0");
  EXPECT_EQ(once[2].worker_id, "w3");
  const auto twice = dedup_first_task(once);
  ASSERT_EQ(twice.size(), once.size());
  for (size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i].dialogue_id, once[i].dialogue_id);
}

TEST(TraitMeans, SplitsByDonationAndRejectsDegenerateGroups) {
  std::vector<ParticipantProfile> ps(3);
  const double agreeable[] = {4.0, 2.0, 3.0};
  const double amount[] = {0.5, 0.0, 1.0};
  for (size_t i = 0; i < 3; ++i) {
    ps[i].worker_id = "w" + std::to_string(i);
    ps[i].role = Role::Persuadee;
    ps[i].big_five[1] = agreeable[i];
    ps[i].donation_actual = amount[i];
  }
  ps[2].big_five[0] = std::nan("");
  const auto split = trait_means_by_donation(Corpus({}, ps));
  EXPECT_EQ(split.n_donated, 2u);
  EXPECT_DOUBLE_EQ(split.mean_donated[1], 3.5);
  EXPECT_DOUBLE_EQ(split.mean_not_donated[1], 2.0);
  EXPECT_DOUBLE_EQ(split.mean_donated[0], 0.0);  // the NaN answer is skipped
  ps[1].donation_actual = 0.1;
  EXPECT_THROW(trait_means_by_donation(Corpus({}, ps)), DomainError);
}

TEST(Basis, PromisedAmountsSelectable) {
  ParticipantProfile p;
  p.donation_actual = 0;
  p.donation_promised = 0.5;
  EXPECT_FALSE(donated(p));
  EXPECT_TRUE(donated(p, DonationBasis::Promised));
}
