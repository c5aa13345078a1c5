#include "pgt/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"
#include "pgt/common.hpp"

namespace pgt {

namespace {

bool is_sentence_end(const std::string& tok) {
  return tok == "." || tok == "!" || tok == "?";
}

// Token index ranges acting as indivisible units for greedy packing.
struct UnitRange {
  size_t begin;
  size_t end;
};

std::vector<UnitRange> split_sentences(const std::vector<text::SpanToken>& toks,
                                       size_t begin, size_t end) {
  std::vector<UnitRange> units;
  size_t start = begin;
  for (size_t i = begin; i < end; ++i) {
    if (is_sentence_end(toks[i].token)) {
      units.push_back({start, i + 1});
      start = i + 1;
    }
  }
  if (start < end) units.push_back({start, end});
  return units;
}

std::vector<UnitRange> split_hard(size_t begin, size_t end, size_t max_tokens) {
  std::vector<UnitRange> units;
  for (size_t s = begin; s < end; s += max_tokens)
    units.push_back({s, std::min(s + max_tokens, end)});
  return units;
}

// Paragraph ranges by blank-line separators, expressed in token indexes.
std::vector<UnitRange> split_paragraphs(const std::string& txt,
                                        const std::vector<text::SpanToken>& toks) {
  // Char offsets where a paragraph break (newline, optional spaces, newline)
  // occurs; every token starting at or after a break begins a new paragraph.
  std::vector<size_t> breaks;
  for (size_t i = 0; i < txt.size(); ++i) {
    if (txt[i] != '\n') continue;
    size_t j = i + 1;
    while (j < txt.size() && (txt[j] == ' ' || txt[j] == '\t' || txt[j] == '\r')) ++j;
    if (j < txt.size() && txt[j] == '\n') breaks.push_back(i);
  }
  std::vector<UnitRange> units;
  size_t start = 0;
  size_t bi = 0;
  for (size_t t = 0; t < toks.size(); ++t) {
    while (bi < breaks.size() && breaks[bi] < toks[t].begin) {
      if (t > start) {
        units.push_back({start, t});
        start = t;
      }
      ++bi;
    }
  }
  if (start < toks.size()) units.push_back({start, toks.size()});
  return units;
}

}  // namespace

BoundaryPolicy boundary_policy_from_string(const std::string& s) {
  if (s == "sentence") return BoundaryPolicy::kSentence;
  if (s == "paragraph") return BoundaryPolicy::kParagraph;
  if (s == "hard") return BoundaryPolicy::kHard;
  throw ConfigError("unknown boundary policy: " + s);
}

std::vector<Segment> segment_document(const Document& doc, const Tokenizer& tok,
                                      size_t max_tokens, BoundaryPolicy policy,
                                      IndexTier tier) {
  if (text::normalize_whitespace(doc.text).empty())
    throw PipelineError("document '" + doc.id + "' is empty after whitespace normalization");
  if (max_tokens < 16)
    throw ConfigError("max_tokens must be >= 16, got " + std::to_string(max_tokens));

  const auto toks = tok.span_tokens(doc.text);

  // Build indivisible units at the requested granularity, refining any
  // oversized unit at the next level down to hard splits.
  std::vector<UnitRange> units;
  const auto refine = [&](const UnitRange& u, BoundaryPolicy level, auto&& self) -> void {
    if (u.end - u.begin <= max_tokens) {
      units.push_back(u);
      return;
    }
    switch (level) {
      case BoundaryPolicy::kParagraph:
        for (const auto& s : split_sentences(toks, u.begin, u.end))
          self(s, BoundaryPolicy::kSentence, self);
        break;
      case BoundaryPolicy::kSentence:
        for (const auto& h : split_hard(u.begin, u.end, max_tokens)) units.push_back(h);
        break;
      case BoundaryPolicy::kHard:
        for (const auto& h : split_hard(u.begin, u.end, max_tokens)) units.push_back(h);
        break;
    }
  };
  std::vector<UnitRange> top;
  switch (policy) {
    case BoundaryPolicy::kParagraph: top = split_paragraphs(doc.text, toks); break;
    case BoundaryPolicy::kSentence: top = split_sentences(toks, 0, toks.size()); break;
    case BoundaryPolicy::kHard: top = split_hard(0, toks.size(), max_tokens); break;
  }
  for (const auto& u : top) refine(u, policy, refine);

  // Greedy packing of consecutive units.
  std::vector<Segment> segments;
  size_t start = 0;
  size_t count = 0;
  const auto flush = [&](size_t end_unit) {
    if (end_unit == start) return;
    Segment s;
    s.doc_id = doc.id;
    s.tier = tier;
    const size_t tb = units[start].begin;
    const size_t te = units[end_unit - 1].end;
    s.char_begin = toks[tb].begin;
    s.char_end = toks[te - 1].end;
    for (size_t t = tb; t < te; ++t) s.token_ids.push_back(tok.id_of(toks[t].token));
    segments.push_back(std::move(s));
    start = end_unit;
    count = 0;
  };
  for (size_t u = 0; u < units.size(); ++u) {
    const size_t len = units[u].end - units[u].begin;
    if (count > 0 && count + len > max_tokens) flush(u);
    count += len;
  }
  flush(units.size());
  return segments;
}

std::vector<Chunk> chunk_segment(const Segment& seg, const Document& doc,
                                 const Tokenizer& tok, size_t chunk_max,
                                 size_t overlap) {
  if (chunk_max < 16)
    throw ConfigError("chunk_max must be >= 16, got " + std::to_string(chunk_max));
  if (overlap >= chunk_max)
    throw ConfigError("chunk overlap must be smaller than chunk_max");
  const auto span = std::string_view(doc.text).substr(seg.char_begin,
                                                      seg.char_end - seg.char_begin);
  const auto toks = tok.span_tokens(span);
  if (toks.size() != seg.token_ids.size())
    throw PipelineError("segment char span does not retokenize to its token ids");

  const size_t n = toks.size();
  const size_t step = chunk_max - overlap;
  std::vector<Chunk> chunks;
  for (size_t s = 0; s < n; s += step) {
    const size_t e = std::min(s + chunk_max, n);
    Chunk c;
    c.parent_segment_id = seg.id;
    c.doc_id = seg.doc_id;
    c.ordinal = static_cast<int>(chunks.size());
    c.token_ids.assign(seg.token_ids.begin() + s, seg.token_ids.begin() + e);
    c.char_begin = seg.char_begin + toks[s].begin;
    c.char_end = seg.char_begin + toks[e - 1].end;
    chunks.push_back(std::move(c));
    if (e == n) break;
  }
  return chunks;
}

CorpusIndex build_indexes(const std::vector<Document>& docs, const IndexConfig& cfg) {
  if (docs.empty()) throw PipelineError("build_indexes requires at least one document");

  CorpusIndex index;
  index.config = cfg;
  for (const auto& d : docs) {
    index.tokenizer.fit(d.text, cfg.vocab_limit, d.id);
    index.documents[d.id] = d.text;
  }

  int next_id = 0;
  for (const auto& d : docs) {
    auto segs = segment_document(d, index.tokenizer, cfg.i1_max_tokens,
                                 cfg.boundary_policy, IndexTier::kI1);
    for (auto& s : segs) {
      s.id = next_id++;
      index.i1.push_back(std::move(s));
    }
  }
  for (const auto& d : docs) {
    auto segs = segment_document(d, index.tokenizer, cfg.i2_max_tokens,
                                 cfg.boundary_policy, IndexTier::kI2);
    for (auto& s : segs) {
      s.id = next_id++;
      index.i2.push_back(std::move(s));
    }
  }
  for (const auto& seg : index.i2) {
    const auto doc_it = index.documents.find(seg.doc_id);
    const Document doc{seg.doc_id, doc_it->second};
    auto chunks = chunk_segment(seg, doc, index.tokenizer, cfg.chunk_max_tokens,
                                cfg.chunk_overlap);
    for (auto& c : chunks) {
      c.id = next_id++;
      index.chunk_to_segment[c.id] = seg.id;
      index.segment_to_chunks[seg.id].push_back(c.id);
      index.i3.push_back(std::move(c));
    }
  }

  // Build-time invariant checks: partition property and size bounds.
  std::map<std::string, std::vector<int>> doc_tokens;
  for (const auto& d : docs) doc_tokens[d.id] = index.tokenizer.encode(d.text);
  std::map<std::string, size_t> covered;
  for (const auto& s : index.i2) {
    if (s.token_ids.size() > cfg.i2_max_tokens)
      throw PipelineError("I2 segment exceeds size bound");
    covered[s.doc_id] += s.token_ids.size();
  }
  for (const auto& [id, toks] : doc_tokens) {
    if (covered[id] != toks.size())
      throw PipelineError("I2 segments do not partition document " + id);
  }
  for (const auto& s : index.i1)
    if (s.token_ids.size() > cfg.i1_max_tokens)
      throw PipelineError("I1 segment exceeds size bound");
  for (const auto& c : index.i3) {
    if (c.token_ids.size() > cfg.chunk_max_tokens)
      throw PipelineError("chunk exceeds chunk_max");
  }
  if (cfg.chunk_overlap == 0) {
    std::map<int, size_t> per_seg;
    for (const auto& c : index.i3) per_seg[c.parent_segment_id] += c.token_ids.size();
    for (const auto& s : index.i2) {
      if (per_seg[s.id] != s.token_ids.size())
        throw PipelineError("chunks do not partition their parent segment");
    }
  }
  return index;
}

const Segment& sample_segment(const std::vector<Segment>& index, Rng& rng) {
  if (index.empty()) throw PipelineError("cannot sample from an empty segment index");
  return index[static_cast<size_t>(rng.below(index.size()))];
}

namespace {
// Ids are assigned densely in build order, so direct indexing is the common
// case; the scan remains as a fallback for loaded/merged indexes.
const Segment* find_segment(const std::vector<Segment>& v, int id) {
  if (!v.empty()) {
    const int first = v.front().id;
    const size_t pos = static_cast<size_t>(id - first);
    if (id >= first && pos < v.size() && v[pos].id == id) return &v[pos];
  }
  for (const auto& s : v)
    if (s.id == id) return &s;
  return nullptr;
}
}  // namespace

const Segment& CorpusIndex::i1_by_id(int id) const {
  if (const Segment* s = find_segment(i1, id)) return *s;
  throw PipelineError("no I1 segment with id " + std::to_string(id));
}

const Segment& CorpusIndex::i2_by_id(int id) const {
  if (const Segment* s = find_segment(i2, id)) return *s;
  throw PipelineError("no I2 segment with id " + std::to_string(id));
}

const Chunk& CorpusIndex::chunk_by_id(int id) const {
  if (!i3.empty()) {
    const int first = i3.front().id;
    const size_t pos = static_cast<size_t>(id - first);
    if (id >= first && pos < i3.size() && i3[pos].id == id) return i3[pos];
  }
  for (const auto& c : i3)
    if (c.id == id) return c;
  throw PipelineError("no chunk with id " + std::to_string(id));
}

bool CorpusIndex::is_chunk_id(int id) const {
  return chunk_to_segment.count(id) > 0;
}

std::string CorpusIndex::segment_text(const Segment& s) const {
  const auto it = documents.find(s.doc_id);
  if (it == documents.end()) throw PipelineError("unknown doc id " + s.doc_id);
  return it->second.substr(s.char_begin, s.char_end - s.char_begin);
}

std::string CorpusIndex::chunk_text(const Chunk& c) const {
  const auto it = documents.find(c.doc_id);
  if (it == documents.end()) throw PipelineError("unknown doc id " + c.doc_id);
  return it->second.substr(c.char_begin, c.char_end - c.char_begin);
}

std::vector<int> CorpusIndex::chunks_overlapping_i1(const Segment& seg) const {
  std::vector<int> out;
  int best_id = -1;
  size_t best_overlap = 0;
  for (const auto& c : i3) {
    if (c.doc_id != seg.doc_id) continue;
    const size_t lo = std::max(c.char_begin, seg.char_begin);
    const size_t hi = std::min(c.char_end, seg.char_end);
    const size_t overlap = hi > lo ? hi - lo : 0;
    if (overlap == 0) continue;
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best_id = c.id;
    }
    if (overlap * 2 >= (c.char_end - c.char_begin)) out.push_back(c.id);
  }
  if (out.empty() && best_id >= 0) out.push_back(best_id);
  return out;
}

namespace {

nlohmann::json segment_to_json(const Segment& s) {
  return nlohmann::json{{"id", s.id},
                        {"doc_id", s.doc_id},
                        {"token_ids", s.token_ids},
                        {"tier", s.tier == IndexTier::kI1 ? "I1" : "I2"},
                        {"char_span", {s.char_begin, s.char_end}}};
}

Segment segment_from_json(const nlohmann::json& j) {
  Segment s;
  s.id = j.at("id").get<int>();
  s.doc_id = j.at("doc_id").get<std::string>();
  s.token_ids = j.at("token_ids").get<std::vector<int>>();
  s.tier = j.at("tier").get<std::string>() == "I1" ? IndexTier::kI1 : IndexTier::kI2;
  s.char_begin = j.at("char_span")[0].get<size_t>();
  s.char_end = j.at("char_span")[1].get<size_t>();
  return s;
}

}  // namespace

nlohmann::json CorpusIndex::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = {{"i1_max_tokens", config.i1_max_tokens},
                 {"i2_max_tokens", config.i2_max_tokens},
                 {"chunk_max_tokens", config.chunk_max_tokens},
                 {"chunk_overlap", config.chunk_overlap},
                 {"boundary_policy",
                  config.boundary_policy == BoundaryPolicy::kParagraph  ? "paragraph"
                  : config.boundary_policy == BoundaryPolicy::kSentence ? "sentence"
                                                                        : "hard"},
                 {"vocab_limit", config.vocab_limit}};
  j["tokenizer"] = tokenizer.to_json();
  j["documents"] = documents;
  j["i1"] = nlohmann::json::array();
  for (const auto& s : i1) j["i1"].push_back(segment_to_json(s));
  j["i2"] = nlohmann::json::array();
  for (const auto& s : i2) j["i2"].push_back(segment_to_json(s));
  j["i3"] = nlohmann::json::array();
  for (const auto& c : i3) {
    j["i3"].push_back(nlohmann::json{{"id", c.id},
                                     {"parent_segment_id", c.parent_segment_id},
                                     {"doc_id", c.doc_id},
                                     {"token_ids", c.token_ids},
                                     {"ordinal", c.ordinal},
                                     {"char_span", {c.char_begin, c.char_end}}});
  }
  j["chunk_to_segment"] = nlohmann::json::object();
  for (const auto& [c, s] : std::map<int, int>(chunk_to_segment.begin(), chunk_to_segment.end()))
    j["chunk_to_segment"][std::to_string(c)] = s;
  j["segment_to_chunks"] = nlohmann::json::object();
  for (const auto& [s, cs] : segment_to_chunks)
    j["segment_to_chunks"][std::to_string(s)] = cs;
  return j;
}

CorpusIndex CorpusIndex::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<std::string>() != kFormatVersion)
    throw PipelineError("unsupported index format version: " +
                        j.at("format_version").get<std::string>());
  CorpusIndex index;
  const auto& c = j.at("config");
  index.config.i1_max_tokens = c.at("i1_max_tokens").get<size_t>();
  index.config.i2_max_tokens = c.at("i2_max_tokens").get<size_t>();
  index.config.chunk_max_tokens = c.at("chunk_max_tokens").get<size_t>();
  index.config.chunk_overlap = c.at("chunk_overlap").get<size_t>();
  index.config.boundary_policy =
      boundary_policy_from_string(c.at("boundary_policy").get<std::string>());
  index.config.vocab_limit = c.at("vocab_limit").get<size_t>();
  index.tokenizer = Tokenizer::from_json(j.at("tokenizer"));
  index.documents = j.at("documents").get<std::map<std::string, std::string>>();
  for (const auto& s : j.at("i1")) index.i1.push_back(segment_from_json(s));
  for (const auto& s : j.at("i2")) index.i2.push_back(segment_from_json(s));
  for (const auto& cj : j.at("i3")) {
    Chunk ck;
    ck.id = cj.at("id").get<int>();
    ck.parent_segment_id = cj.at("parent_segment_id").get<int>();
    ck.doc_id = cj.at("doc_id").get<std::string>();
    ck.token_ids = cj.at("token_ids").get<std::vector<int>>();
    ck.ordinal = cj.at("ordinal").get<int>();
    ck.char_begin = cj.at("char_span")[0].get<size_t>();
    ck.char_end = cj.at("char_span")[1].get<size_t>();
    index.i3.push_back(std::move(ck));
  }
  for (const auto& [k, v] : j.at("chunk_to_segment").items())
    index.chunk_to_segment[std::stoi(k)] = v.get<int>();
  for (const auto& [k, v] : j.at("segment_to_chunks").items())
    index.segment_to_chunks[std::stoi(k)] = v.get<std::vector<int>>();
  return index;
}

void CorpusIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write index file: " + path);
  out << to_json().dump() << "\n";
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open index file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

std::vector<Document> load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw PipelineError("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    docs.push_back({p.stem().string(), std::move(content)});
  }
  if (docs.empty()) throw PipelineError("corpus directory is empty: " + dir);
  return docs;
}

}  // namespace pgt
