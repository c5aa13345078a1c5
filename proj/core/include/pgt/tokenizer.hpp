#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "pgt/text.hpp"

namespace pgt {

// Deterministic lowercasing + punctuation-splitting word tokenizer with a
// corpus-built vocabulary. The interface is intentionally small so a subword
// tokenizer could be substituted behind it.
//
// A fixed set of canonical strings (the refusal answer, the correctness
// labels and the correctness-prompt words) is always present in the
// vocabulary so downstream prompts are expressible on any corpus.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kUnk = 4;

  static const char* refusal_text();  // canonical "cannot answer ..." string

  Tokenizer();

  // Adds every unseen token of `text` to the vocabulary.
  // Throws PipelineError when the vocabulary would exceed `vocab_limit`
  // (0 disables the check); the message names `source_name`.
  void fit(std::string_view text, size_t vocab_limit = 0,
           std::string_view source_name = {});

  std::vector<int> encode(std::string_view text) const;  // OOV -> kUnk
  std::vector<text::SpanToken> span_tokens(std::string_view text) const {
    return text::word_tokenize_spans(text);
  }
  int id_of(std::string_view token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  std::string decode(const std::vector<int>& ids) const;  // specials skipped

  size_t vocab_size() const { return id_to_token_.size(); }
  std::string vocab_hash() const;

  // Canonical sequences (computed once after construction/fit).
  const std::vector<int>& refusal_ids() const { return refusal_ids_; }
  int correct_id() const { return correct_id_; }
  int wrong_id() const { return wrong_id_; }

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

 private:
  void add_token(const std::string& tok);
  void refresh_reserved();

  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<int> refusal_ids_;
  int correct_id_ = kUnk;
  int wrong_id_ = kUnk;
};

}  // namespace pgt
