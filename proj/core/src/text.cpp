#include "pgt/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace pgt::text {

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading spaces dropped
  for (const char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<SpanToken> word_tokenize_spans(std::string_view s) {
  std::vector<SpanToken> out;
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isalnum(c)) {
      size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({lowercase(s.substr(i, j - i)), i, j});
      i = j;
    } else {
      out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
      ++i;
    }
  }
  return out;
}

std::vector<std::string> word_tokenize(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : word_tokenize_spans(s)) out.push_back(std::move(t.token));
  return out;
}

double token_f1(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : a) counts[t]++;
  int overlap = 0;
  for (const auto& t : b) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = double(overlap) / double(b.size());
  const double recall = double(overlap) / double(a.size());
  return 2.0 * precision * recall / (precision + recall);
}

double token_f1_text(std::string_view a, std::string_view b) {
  return token_f1(word_tokenize(a), word_tokenize(b));
}

bool starts_with_tokens(const std::vector<std::string>& tokens,
                        const std::vector<std::string>& prefix) {
  if (tokens.size() < prefix.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), tokens.begin());
}

}  // namespace pgt::text
