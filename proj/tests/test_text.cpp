#include <gtest/gtest.h>

#include "bioinvert/text.hpp"

using namespace bioinvert::text;

TEST(Text, CollapseAndKey) {
  EXPECT_EQ(collapse_whitespace("  a \t b\n\nc  "), "a b c");
  EXPECT_EQ(phrase_key("  Driving   Flexible structure "), "driving flexible structure");
  EXPECT_EQ(trim("\t x y \n"), "x y");
}

TEST(Text, TokenizeOffsetsAndClauses) {
  const std::string s = "The fin, bent sideways; pushes water.";
  const auto toks = tokenize(s);
  ASSERT_EQ(toks.size(), 6u);
  for (const auto& t : toks) EXPECT_EQ(to_lower(s.substr(t.begin, t.end - t.begin)), t.word);
  EXPECT_EQ(toks[0].word, "the");
  EXPECT_EQ(toks[1].clause, 0u);
  EXPECT_EQ(toks[2].clause, 1u);  // after the comma
  EXPECT_GT(toks[4].clause, toks[3].clause);
}

TEST(Text, TokenizeKeepsInnerHyphens) {
  const auto toks = tokenize("diamond-shaped fins");
  ASSERT_EQ(toks.size(), 2u);
  EXPECT_EQ(toks[0].word, "diamond-shaped");
}

TEST(Text, JaccardEdgeCases) {
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard({"a"}, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard({"a", "b"}, {"b", "c"}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(jaccard({"a", "b"}, {"a", "b"}), 1.0);
}

TEST(Text, ContentStemsDropStopwordsAndNumbers) {
  const auto s = content_stems("The 3 fins of the fish");
  EXPECT_FALSE(s.contains("the"));
  EXPECT_FALSE(s.contains("of"));
  EXPECT_FALSE(s.contains("3"));
  EXPECT_EQ(s.size(), 2u);
  // Plural and singular share a stem.
  EXPECT_EQ(content_stems("fins"), content_stems("fin"));
}

TEST(Text, MatchLeadingCase) {
  EXPECT_EQ(match_leading_case("Mantle", "pressure chamber"), "Pressure chamber");
  EXPECT_EQ(match_leading_case("mantle", "pressure chamber"), "pressure chamber");
}

TEST(Text, SplitAndJoin) {
  const auto w = split_words("  a  bb ccc ");
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(join(w, "+"), "a+bb+ccc");
}
