#include "bioinvert/text.hpp"

#include <algorithm>
#include <cctype>

namespace bioinvert::text {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// Decodes one UTF-8 code point starting at s[i]; returns its byte length.
std::size_t decode(std::string_view s, std::size_t i, char32_t& cp) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (c < 0x80) {
    cp = c;
  } else if ((c >> 5) == 0x6) {
    cp = c & 0x1F;
    len = 2;
  } else if ((c >> 4) == 0xE) {
    cp = c & 0x0F;
    len = 3;
  } else if ((c >> 3) == 0x1E) {
    cp = c & 0x07;
    len = 4;
  } else {
    cp = c;
    return 1;
  }
  if (i + len > s.size()) {
    cp = c;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  return len;
}

bool is_wide_punct(char32_t cp) {
  return (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65) || (cp >= 0x2010 && cp <= 0x2027);
}

bool is_word_cp(char32_t cp) {
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
  return !is_wide_punct(cp) && cp != 0x00A0;
}

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a",    "an",   "and",  "are",  "as",   "at",    "be",    "been", "by",    "can",
      "each", "for",  "from", "had",  "has",  "have",  "in",    "into", "is",    "it",
      "its",  "may",  "no",   "not",  "of",   "on",    "onto",  "or",   "out",   "over",
      "per",  "such", "than", "that", "the",  "their", "then",  "these", "this", "those",
      "through", "to", "under", "up", "via", "was",  "were",  "which", "with", "within"};
  return words;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::string phrase_key(std::string_view s) { return to_lower(collapse_whitespace(s)); }

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t clause = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    char32_t cp;
    std::size_t len = decode(s, i, cp);
    if (!is_word_cp(cp)) {
      if (!(cp < 0x80 && is_space(static_cast<unsigned char>(cp)))) {
        // Hyphens and apostrophes between word characters stay in the word;
        // anything else reaching here is punctuation.
        ++clause;
      }
      i += len;
      continue;
    }
    std::size_t begin = i;
    std::size_t end = i;
    while (i < s.size()) {
      len = decode(s, i, cp);
      if (is_word_cp(cp)) {
        i += len;
        end = i;
        continue;
      }
      if ((cp == '-' || cp == '\'') && i + 1 < s.size()) {
        char32_t next;
        decode(s, i + 1, next);
        if (is_word_cp(next)) {
          i += 1;
          continue;
        }
      }
      break;
    }
    out.push_back(Token{to_lower(s.substr(begin, end - begin)), begin, end, clause});
  }
  return out;
}

std::string stem(std::string_view word) {
  std::string w = to_lower(word);
  if (w.size() >= 5 && ends_with(w, "ing")) {
    w.resize(w.size() - 3);
  } else if (w.size() >= 5 && ends_with(w, "ies")) {
    w.resize(w.size() - 3);
    w.push_back('y');
  } else if (w.size() >= 4 && ends_with(w, "ed")) {
    w.resize(w.size() - 2);
  } else if (w.size() >= 4 && ends_with(w, "es")) {
    w.resize(w.size() - 2);
  } else if (w.size() >= 4 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
             !ends_with(w, "is")) {
    w.pop_back();
  }
  if (w.size() >= 3 && w.back() == 'e') w.pop_back();
  if (w.size() >= 3) {
    const char a = w[w.size() - 1];
    const char b = w[w.size() - 2];
    if (a == b && !is_vowel(a) && std::isalpha(static_cast<unsigned char>(a))) w.pop_back();
  }
  return w;
}

bool is_stopword(std::string_view lower_word) { return stopwords().contains(lower_word); }

std::set<std::string> content_stems(std::string_view s) {
  std::set<std::string> out;
  for (const auto& tok : tokenize(s)) {
    if (is_stopword(tok.word)) continue;
    if (std::all_of(tok.word.begin(), tok.word.end(),
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }))
      continue;
    out.insert(stem(tok.word));
  }
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

std::string match_leading_case(std::string_view model, std::string replacement) {
  if (!model.empty() && !replacement.empty() && std::isupper(static_cast<unsigned char>(model[0])))
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  return replacement;
}

}  // namespace bioinvert::text
