#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pgt::text {

// Collapse all whitespace runs to single spaces and trim the ends.
std::string normalize_whitespace(std::string_view s);

std::string lowercase(std::string_view s);

// Word-level split: lowercased alphanumeric runs, one token per punctuation
// character, whitespace discarded. This is the shared rule for the corpus
// tokenizer, the teacher stub and the overlap metrics.
std::vector<std::string> word_tokenize(std::string_view s);

struct SpanToken {
  std::string token;
  size_t begin = 0;  // char offsets into the original string
  size_t end = 0;
};
std::vector<SpanToken> word_tokenize_spans(std::string_view s);

// Multiset token F1 between two already-tokenized answers.
double token_f1(const std::vector<std::string>& a, const std::vector<std::string>& b);

// token_f1 over word_tokenize of both strings.
double token_f1_text(std::string_view a, std::string_view b);

bool starts_with_tokens(const std::vector<std::string>& tokens,
                        const std::vector<std::string>& prefix);

}  // namespace pgt::text
