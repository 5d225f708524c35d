#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "bioinvert/corpus.hpp"
#include "support.hpp"

using namespace bioinvert;
using bioinvert::testing::fixture;

namespace {

std::vector<LabeledSentence> synthetic(std::size_t n) {
  std::vector<LabeledSentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSentence s;
    s.sentence = {"doc:" + std::to_string(i + 1), "doc", "Sentence number " + std::to_string(i + 1) + ".", 0, 0};
    s.labels = {Dimension::Function};
    s.scores = indicator_scores(s.labels);
    out.push_back(std::move(s));
  }
  return out;
}

// Counts calls so tests can check when paraphrasing is skipped.
struct CountingParaphraser : Paraphraser {
  mutable std::size_t calls = 0;
  std::string paraphrase(std::string_view text, std::uint64_t variant) const override {
    ++calls;
    return std::string(text) + " #" + std::to_string(variant);
  }
};

// Independent oracle for the audit size.
std::size_t audit_oracle(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.03 * static_cast<double>(n))));
}

}  // namespace

TEST(Segment, GoldenCorpus) {
  std::ifstream in(fixture("golden/segmentation.json"));
  const auto golden = Json::parse(in);
  ASSERT_FALSE(golden.empty());
  for (const auto& d : golden) {
    const auto doc = d["doc"].get<std::string>();
    const auto recs = segment(doc, "g");
    std::vector<std::string> got;
    for (const auto& r : recs) {
      got.push_back(r.text);
      EXPECT_EQ(doc.substr(r.begin, r.end - r.begin), r.text);
    }
    EXPECT_EQ(got, d["sentences"].get<std::vector<std::string>>()) << doc;
  }
}

TEST(Segment, Examples) {
  const auto two = segment("A swims. B crawls.", "d");
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].text, "A swims.");
  EXPECT_EQ(two[1].text, "B crawls.");
  EXPECT_EQ(two[1].id, "d:2");
  EXPECT_EQ(segment("It shrinks (approx. 63%) fast.", "d").size(), 1u);
  EXPECT_BIO_ERROR(segment("", "d"), ErrorCode::EmptyDocument);
  EXPECT_BIO_ERROR(segment("  \n\t", "d"), ErrorCode::EmptyDocument);
}

TEST(Segment, CjkTerminators) {
  const auto r = segment("鱼游动。乌贼喷水！", "d");
  ASSERT_EQ(r.size(), 2u);
}

TEST(Classify, GoldenThirty) {
  std::ifstream in(fixture("golden/classification-30.jsonl"));
  LexiconClassifier lexicon;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto r = Json::parse(line);
    LabelSet expected;
    for (const auto& l : r["labels"]) expected.insert(dimension_from_string(l.get<std::string>()));
    const auto got = classify(SentenceRecord{r["id"], "g", r["text"], 0, 0}, lexicon);
    EXPECT_EQ(got.labels, expected) << r["id"] << ": " << r["text"];
    ++n;
  }
  EXPECT_EQ(n, 30u);
}

TEST(Classify, Examples) {
  LexiconClassifier lexicon;
  const auto c = classify(SentenceRecord{"x", "d", "The mantle acts as an elastic energy storage structure.", 0, 0}, lexicon);
  EXPECT_TRUE(c.labels.contains(Dimension::Characteristic));
  const auto none = classify(SentenceRecord{"y", "d", "Yesterday it was sunny.", 0, 0}, lexicon);
  EXPECT_TRUE(none.labels.empty());
  for (double s : none.scores) EXPECT_EQ(s, 0.0);
}

TEST(Classify, ThresholdMonotone) {
  LexiconClassifier lexicon;
  for (const char* text : {"The squid mantle contracts rapidly to expel water through the funnel.",
                           "Collagen fibers in the mantle are arranged in a helical layer.",
                           "On the sandy seafloor the worm anchors its rear end."}) {
    const auto scores = lexicon.score_text(text);
    for (double s : scores) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    EXPECT_TRUE(threshold_labels(scores, 0.9).is_subset_of(threshold_labels(scores, 0.5)));
  }
}

TEST(Classify, HumanLabelsOverride) {
  LexiconClassifier lexicon;
  HumanLabels human({{"a", LabelSet{Dimension::Environment}}}, &lexicon);
  const auto a = classify(SentenceRecord{"a", "d", "The fin bends.", 0, 0}, human);
  EXPECT_EQ(a.labels, LabelSet{Dimension::Environment});
  EXPECT_EQ(a.source, LabelSource::Human);
  const auto b = classify(SentenceRecord{"b", "d", "The fin bends.", 0, 0}, human);
  EXPECT_EQ(b.labels, classify(SentenceRecord{"b", "d", "The fin bends.", 0, 0}, lexicon).labels);
}

TEST(Batches, AuditSizeMatchesOracle) {
  for (std::size_t n = 0; n <= 1000; ++n) EXPECT_EQ(audit_size(n), audit_oracle(n)) << n;
  EXPECT_EQ(audit_size(100), 3u);
  EXPECT_EQ(audit_size(88), 3u);  // 2.64 rounds up
  EXPECT_EQ(audit_size(1), 1u);
  EXPECT_EQ(audit_size(50), 2u);  // 1.5 rounds half away from zero
}

TEST(Batches, LargeCorpusArithmetic) {
  const auto labeled = synthetic(18888);
  const auto batches = build_review_batches(labeled, 42);
  ASSERT_EQ(batches.size(), 189u);
  for (std::size_t i = 0; i < 188; ++i) {
    EXPECT_EQ(batches[i].items.size(), 100u);
    EXPECT_EQ(batches[i].audit_sample.size(), 3u);
    EXPECT_EQ(batches[i].batch_no, i + 1);
  }
  EXPECT_EQ(batches[188].items.size(), 88u);
  EXPECT_EQ(batches[188].audit_sample.size(), 3u);
  // Audit samples are members of their batch, without repeats.
  for (const auto& b : batches) {
    std::set<std::string> ids, sample(b.audit_sample.begin(), b.audit_sample.end());
    for (const auto& s : b.items) ids.insert(s.sentence.id);
    EXPECT_EQ(sample.size(), b.audit_sample.size());
    for (const auto& a : sample) EXPECT_TRUE(ids.contains(a));
  }
  // Reproducible.
  const auto again = build_review_batches(labeled, 42);
  for (std::size_t i = 0; i < batches.size(); ++i) EXPECT_EQ(again[i].audit_sample, batches[i].audit_sample);
}

TEST(Batches, SingleSentence) {
  const auto b = build_review_batches(synthetic(1), 1);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].audit_sample.size(), 1u);
}

TEST(Batches, StatusRules) {
  auto b = build_review_batches(synthetic(100), 3)[0];
  EXPECT_EQ(batch_status(b), BatchStatus::Open);
  record_verdict(b, b.audit_sample[0], Verdict::Pass);
  record_verdict(b, b.audit_sample[1], Verdict::Pass);
  EXPECT_EQ(batch_status(b), BatchStatus::Open);
  record_verdict(b, b.audit_sample[2], Verdict::Pass);
  EXPECT_EQ(batch_status(b), BatchStatus::Clean);
  record_verdict(b, b.audit_sample[1], Verdict::Fail);
  EXPECT_EQ(batch_status(b), BatchStatus::Dirty);
  EXPECT_BIO_ERROR(record_verdict(b, "no-such-id", Verdict::Pass), ErrorCode::NotFound);
}

TEST(Batches, JsonRoundtrip) {
  auto b = build_review_batches(synthetic(120), 5)[1];
  record_verdict(b, b.audit_sample[0], Verdict::Fail);
  b.status = batch_status(b);
  const auto back = batch_from_json(to_json(b));
  EXPECT_EQ(to_json(back), to_json(b));
}

TEST(Samples, EightyTwentySplit) {
  const auto reviewed = synthetic(9000);
  CountingParaphraser para;
  const auto s = generate_samples(reviewed, 10000, 0.8, 11, para);
  EXPECT_EQ(s.real.size(), 8000u);
  EXPECT_EQ(s.augmented.size(), 2000u);
  EXPECT_EQ(para.calls, 2000u);
  std::set<std::string> real_ids;
  for (const auto& r : s.real) real_ids.insert(r.sentence.id);
  EXPECT_EQ(real_ids.size(), 8000u);  // without replacement
  for (const auto& a : s.augmented) EXPECT_FALSE(a.labels.empty());  // no negative samples
  const auto again = generate_samples(reviewed, 10000, 0.8, 11, para);
  EXPECT_EQ(to_json(again), to_json(s));
}

TEST(Samples, RatioOneNeverParaphrases) {
  CountingParaphraser para;
  const auto s = generate_samples(synthetic(10), 10, 1.0, 1, para);
  EXPECT_EQ(s.real.size(), 10u);
  EXPECT_TRUE(s.augmented.empty());
  EXPECT_EQ(para.calls, 0u);
}

TEST(Samples, InsufficientCorpus) {
  CountingParaphraser para;
  EXPECT_BIO_ERROR(generate_samples(synthetic(7), 10, 0.8, 1, para), ErrorCode::InsufficientCorpus);
}

TEST(Samples, RealCountRounding) {
  EXPECT_EQ(real_sample_count(10000, 0.8), 8000u);
  EXPECT_EQ(real_sample_count(5, 0.5), 3u);
  EXPECT_EQ(real_sample_count(3, 0.5), 2u);
}

TEST(ReviewLoop, AllCleanTerminatesWithoutRelabel) {
  auto batches = build_review_batches(synthetic(250), 9);
  for (auto& b : batches) {
    for (const auto& id : b.audit_sample) record_verdict(b, id, Verdict::Pass);
    b.status = batch_status(b);
  }
  struct Throwing : Classifier {
    DimensionScores score(const SentenceRecord&) const override { throw std::logic_error("relabel called"); }
    LabelSource source() const override { return LabelSource::Human; }
  } never;
  const auto r = review_loop_step(batches, never, {}, 9);
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.relabeled_batches, 0u);
}

TEST(ReviewLoop, HumanRelabelCleansDirtyBatch) {
  auto batches = build_review_batches(synthetic(100), 4);
  auto& b = batches[0];
  for (const auto& id : b.audit_sample) record_verdict(b, id, Verdict::Pass);
  record_verdict(b, b.audit_sample[0], Verdict::Fail);
  b.status = batch_status(b);
  ASSERT_EQ(b.status, BatchStatus::Dirty);
  std::map<std::string, LabelSet> fixes;
  for (const auto& s : b.items) fixes[s.sentence.id] = {Dimension::Behavior};
  HumanLabels human(fixes);
  const auto r = review_loop_step(batches, human, [](const LabeledSentence&) { return Verdict::Pass; }, 4);
  EXPECT_EQ(r.relabeled_batches, 1u);
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(batches[0].status, BatchStatus::Clean);
  EXPECT_EQ(batches[0].items[0].labels, LabelSet{Dimension::Behavior});
  EXPECT_EQ(batches[0].round, 1u);
}

TEST(ReviewLoop, StandingFailHitsMaxRounds) {
  auto batches = build_review_batches(synthetic(100), 4);
  LexiconClassifier constant;
  const auto r = run_review_loop(batches, constant, [](const LabeledSentence&) { return Verdict::Fail; }, 4, 5);
  EXPECT_FALSE(r.terminated);
  EXPECT_EQ(r.rounds, 5u);
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(*r.failure, ErrorCode::MaxRoundsExceeded);
}

TEST(Documents, JsonlRecords) {
  std::istringstream in("{\"doc_id\":\"a\",\"text\":\"One.\"}\n\n{\"doc_id\":\"b\",\"text\":\"Two.\"}\n");
  const auto docs = read_document_records(in);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[1].doc_id, "b");
}
