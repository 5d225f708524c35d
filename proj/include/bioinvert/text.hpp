#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace bioinvert::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Collapses runs of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

// Key used for duplicate detection: lowercase + whitespace collapse.
std::string phrase_key(std::string_view s);

std::vector<std::string> split_words(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

struct Token {
  std::string word;  // lowercased
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t clause = 0;
};

// Word tokens (letters, digits, inner hyphens/apostrophes), lowercased, with
// byte offsets. Punctuation advances the clause counter.
std::vector<Token> tokenize(std::string_view s);

// Light suffix stripper shared by the lexicon cues and similarity measures.
std::string stem(std::string_view word);

bool is_stopword(std::string_view lower_word);

// Stemmed content tokens (stopwords and pure numbers removed).
std::set<std::string> content_stems(std::string_view s);

// |a ∩ b| / |a ∪ b|, with J(∅, ∅) = 1.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Upper-cases the first letter when `model` starts with an upper-case letter.
std::string match_leading_case(std::string_view model, std::string replacement);

}  // namespace bioinvert::text
