#include "pgt/tokenizer.hpp"

#include "nlohmann/json.hpp"
#include "pgt/common.hpp"
#include "pgt/sha256.hpp"

namespace pgt {

namespace {
const char* kRefusal = "cannot answer this question based on given information";
// Words of the correctness-judging prompt plus the two label tokens.
const char* kReservedPhrases[] = {
    kRefusal,
    "question : evidence : proposed answer : is the proposed answer correct or wrong :",
    "correct wrong yes no",
};
const char* kSpecialNames[] = {"<pad>", "<bos>", "<eos>", "<sep>", "<unk>"};
}  // namespace

const char* Tokenizer::refusal_text() { return kRefusal; }

Tokenizer::Tokenizer() {
  for (const char* name : kSpecialNames) add_token(name);
  for (const char* phrase : kReservedPhrases) {
    for (const auto& tok : text::word_tokenize(phrase)) {
      if (!token_to_id_.count(tok)) add_token(tok);
    }
  }
  refresh_reserved();
}

void Tokenizer::add_token(const std::string& tok) {
  const int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(tok, id);
  id_to_token_.push_back(tok);
}

void Tokenizer::refresh_reserved() {
  refusal_ids_ = encode(kRefusal);
  correct_id_ = id_of("correct");
  wrong_id_ = id_of("wrong");
}

void Tokenizer::fit(std::string_view txt, size_t vocab_limit,
                    std::string_view source_name) {
  for (const auto& tok : text::word_tokenize(txt)) {
    if (token_to_id_.count(tok)) continue;
    if (vocab_limit > 0 && id_to_token_.size() >= vocab_limit) {
      throw PipelineError("tokenizer vocabulary overflow (limit " +
                          std::to_string(vocab_limit) + ") while ingesting '" +
                          std::string(source_name) + "'");
    }
    add_token(tok);
  }
}

std::vector<int> Tokenizer::encode(std::string_view txt) const {
  std::vector<int> ids;
  for (const auto& tok : text::word_tokenize(txt)) {
    auto it = token_to_id_.find(tok);
    ids.push_back(it == token_to_id_.end() ? kUnk : it->second);
  }
  return ids;
}

int Tokenizer::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token_of(int id) const {
  if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
    throw PipelineError("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (const int id : ids) {
    if (id == kPad || id == kBos || id == kEos || id == kSep) continue;
    if (!out.empty()) out.push_back(' ');
    out += token_of(id);
  }
  return out;
}

std::string Tokenizer::vocab_hash() const {
  Sha256 h;
  for (const auto& tok : id_to_token_) {
    h.update(tok);
    h.update("\n");
  }
  const auto d = h.digest();
  static const char* kHex = "0123456789abcdef";
  std::string s;
  for (const uint8_t b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

nlohmann::json Tokenizer::to_json() const {
  return nlohmann::json{{"tokens", id_to_token_}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  Tokenizer t;
  const auto& tokens = j.at("tokens").get<std::vector<std::string>>();
  // The reserved prefix must agree with this build; everything after is
  // appended verbatim.
  if (tokens.size() < t.vocab_size())
    throw PipelineError("tokenizer file is missing reserved tokens");
  for (size_t i = 0; i < t.vocab_size(); ++i) {
    if (tokens[i] != t.id_to_token_[i])
      throw PipelineError("tokenizer file reserved token mismatch at id " +
                          std::to_string(i));
  }
  for (size_t i = t.vocab_size(); i < tokens.size(); ++i) t.add_token(tokens[i]);
  t.refresh_reserved();
  return t;
}

}  // namespace pgt
