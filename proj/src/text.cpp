#include "fisco/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace fisco::text {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

constexpr std::array<std::string_view, 13> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "inc"};

// Word immediately preceding position `dot` (exclusive), lowercased.
std::string word_before(std::string_view s, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !is_space(static_cast<unsigned char>(s[begin - 1]))) --begin;
  return to_lower(s.substr(begin, dot - begin));
}

bool is_abbreviation(const std::string& word) {
  std::string w = word;
  while (!w.empty() && (w.front() == '(' || w.front() == '"')) w.erase(w.begin());
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), w) != kAbbreviations.end()) return true;
  // Initials and initialisms: "J", "B.S", "U.S".
  if (w.size() == 1 && std::isalpha(static_cast<unsigned char>(w[0]))) return true;
  return w.size() >= 3 && w[w.size() - 2] == '.';
}

// Enumerator such as "1." or "12)" starting at `pos` and followed by whitespace.
std::size_t enumerator_length(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i < s.size() && i - pos < 3 && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == pos || i - pos > 2 || i >= s.size()) return 0;
  if (s[i] != '.' && s[i] != ')') return 0;
  ++i;
  if (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) return 0;
  return i - pos;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    std::string t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    current.clear();
  };

  std::size_t i = 0;
  while (i < s.size()) {
    const bool at_word_start = i == 0 || is_space(static_cast<unsigned char>(s[i - 1]));
    if (at_word_start) {
      if (const std::size_t n = enumerator_length(s, i); n > 0) {
        flush();
        i += n;
        continue;
      }
    }

    const char c = s[i];
    current.push_back(c);
    ++i;
    if (c != '.' && c != '!' && c != '?') continue;
    const std::size_t terminator = current.size() - 1;

    // Absorb closing quotes/brackets and repeated terminators.
    while (i < s.size() && (s[i] == '"' || s[i] == '\'' || s[i] == ')' || s[i] == '.' || s[i] == '!' ||
                            s[i] == '?')) {
      current.push_back(s[i]);
      ++i;
    }
    if (i >= s.size()) break;
    if (!is_space(static_cast<unsigned char>(s[i]))) continue;

    std::size_t j = i;
    while (j < s.size() && is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j >= s.size()) break;
    const auto next = static_cast<unsigned char>(s[j]);
    const bool starts_sentence = std::isupper(next) || std::isdigit(next) || next == '"' || next == '(' || next >= 0x80;
    if (!starts_sentence) continue;
    if (c == '.') {
      if (is_abbreviation(word_before(current, terminator))) continue;
    }
    flush();
  }
  flush();
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& raw : split_whitespace(s)) {
    std::string tok;
    tok.reserve(raw.size());
    for (char c : raw) {
      const auto u = static_cast<unsigned char>(c);
      if (u >= 0x80) {
        tok.push_back(c);
      } else if (!is_ascii_punct(u) || c == '\'' || c == '-') {
        tok.push_back(static_cast<char>(std::tolower(u)));
      }
    }
    while (!tok.empty() && (tok.front() == '\'' || tok.front() == '-')) tok.erase(tok.begin());
    while (!tok.empty() && (tok.back() == '\'' || tok.back() == '-')) tok.pop_back();
    if (!tok.empty()) out.push_back(std::move(tok));
  }
  return out;
}

std::string replace_all(std::string_view s, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = s.find(from, pos);
    if (hit == std::string_view::npos) break;
    out.append(s.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
  out.append(s.substr(pos));
  return out;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

}  // namespace fisco::text
