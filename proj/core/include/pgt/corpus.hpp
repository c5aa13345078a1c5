#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "pgt/rng.hpp"
#include "pgt/tokenizer.hpp"

namespace pgt {

struct Document {
  std::string id;
  std::string text;
};

enum class IndexTier { kI1, kI2 };

enum class BoundaryPolicy { kSentence, kParagraph, kHard };
BoundaryPolicy boundary_policy_from_string(const std::string& s);

struct Segment {
  int id = -1;
  std::string doc_id;
  std::vector<int> token_ids;
  IndexTier tier = IndexTier::kI1;
  size_t char_begin = 0;
  size_t char_end = 0;
};

struct Chunk {
  int id = -1;
  int parent_segment_id = -1;
  std::string doc_id;
  std::vector<int> token_ids;
  int ordinal = 0;
  size_t char_begin = 0;
  size_t char_end = 0;
};

struct IndexConfig {
  size_t i1_max_tokens = 2048;
  size_t i2_max_tokens = 384;
  size_t chunk_max_tokens = 300;
  size_t chunk_overlap = 0;
  BoundaryPolicy boundary_policy = BoundaryPolicy::kParagraph;
  size_t vocab_limit = 50000;
};

// The three-tier corpus index: I1 segments for teacher prompting, I2
// segments sized for the generator context, I3 chunks for retrieval.
// Immutable once built; safe for concurrent readers.
struct CorpusIndex {
  static constexpr const char* kFormatVersion = "pgt-index-1";

  Tokenizer tokenizer;
  IndexConfig config;
  std::vector<Segment> i1;
  std::vector<Segment> i2;
  std::vector<Chunk> i3;
  std::unordered_map<int, int> chunk_to_segment;
  std::map<int, std::vector<int>> segment_to_chunks;
  std::map<std::string, std::string> documents;  // doc_id -> full text

  const Segment& i1_by_id(int id) const;
  const Segment& i2_by_id(int id) const;
  const Chunk& chunk_by_id(int id) const;
  bool is_chunk_id(int id) const;

  std::string segment_text(const Segment& s) const;
  std::string chunk_text(const Chunk& c) const;

  // I3 chunk ids overlapping an I1 segment (used to map a prompting passage
  // onto its retrieval-tier decomposition). A chunk counts when at least
  // half of it lies inside the segment span; the best-overlapping chunk is
  // always included so the result is non-empty.
  std::vector<int> chunks_overlapping_i1(const Segment& i1_segment) const;

  nlohmann::json to_json() const;
  static CorpusIndex from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static CorpusIndex load(const std::string& path);
};

// Splits one document into segments of at most `max_tokens` tokens,
// preferring paragraph then sentence boundaries and falling back to hard
// splits when a single unit is oversized.
std::vector<Segment> segment_document(const Document& doc, const Tokenizer& tok,
                                      size_t max_tokens, BoundaryPolicy policy,
                                      IndexTier tier);

// Greedy, ordinal-ordered decomposition of a segment into chunks of at most
// `chunk_max` tokens sharing `overlap` tokens between neighbours.
std::vector<Chunk> chunk_segment(const Segment& seg, const Document& doc,
                                 const Tokenizer& tok, size_t chunk_max,
                                 size_t overlap = 0);

CorpusIndex build_indexes(const std::vector<Document>& docs, const IndexConfig& cfg);

const Segment& sample_segment(const std::vector<Segment>& index, Rng& rng);

// Directory of UTF-8 plain-text files, one document per file; the file stem
// is the doc_id. Files are read in sorted filename order.
std::vector<Document> load_corpus_dir(const std::string& dir);

}  // namespace pgt
