#include "finsage/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "finsage/errors.hpp"

namespace finsage {

const char* block_type_name(BlockType type) {
  switch (type) {
    case BlockType::kText: return "text";
    case BlockType::kTable: return "table";
    case BlockType::kImage: return "image";
  }
  return "text";
}

// ---------------------------------------------------------------------------
// parsing

std::vector<RawBlock> parse_content_list(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("content list is not valid JSON at byte " + std::to_string(e.byte) + ": " +
                         e.what(),
                     e.byte);
  }
  if (!doc.is_array()) throw Error(ErrorCode::kSchema, "content list must be a JSON array");

  std::vector<RawBlock> blocks;
  blocks.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "block " + std::to_string(i);
    if (!item.is_object()) throw Error(ErrorCode::kSchema, where + ": not an object");
    if (!item.contains("type") || !item["type"].is_string()) {
      throw Error(ErrorCode::kSchema, where + ": missing 'type'");
    }
    RawBlock block;
    const auto type = item["type"].get<std::string>();
    if (type == "text") {
      block.type = BlockType::kText;
    } else if (type == "table") {
      block.type = BlockType::kTable;
    } else if (type == "image") {
      block.type = BlockType::kImage;
    } else {
      throw Error(ErrorCode::kSchema, where + ": unknown type '" + type + "'");
    }
    if (!item.contains("page_idx") || !item["page_idx"].is_number_integer() ||
        item["page_idx"].get<long long>() < 0) {
      throw Error(ErrorCode::kSchema, where + ": 'page_idx' must be a non-negative integer");
    }
    block.page_idx = item["page_idx"].get<int>();
    if (item.contains("text") && !item["text"].is_null()) {
      if (!item["text"].is_string()) throw Error(ErrorCode::kSchema, where + ": 'text' must be a string");
      block.text = item["text"].get<std::string>();
    }
    if (item.contains("text_level") && !item["text_level"].is_null()) {
      if (!item["text_level"].is_number_integer() || item["text_level"].get<long long>() < 1) {
        throw Error(ErrorCode::kSchema, where + ": 'text_level' must be an integer >= 1");
      }
      block.text_level = item["text_level"].get<int>();
    }
    for (const auto& [key, value] : item.items()) {
      if (key == "type" || key == "text" || key == "text_level" || key == "page_idx") continue;
      if (key == "img_path" && block.type != BlockType::kText && value.is_string()) {
        block.img_path = value.get<std::string>();
        continue;
      }
      block.extras[key] = value;
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

std::vector<SemanticSegment> group_segments(const std::vector<RawBlock>& blocks,
                                            const std::string& document_id) {
  std::vector<SemanticSegment> segments;
  bool open = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].is_heading()) {
      SemanticSegment seg;
      seg.title = trim(blocks[i].text);
      if (seg.title.empty()) seg.title = document_id;
      seg.document_id = document_id;
      segments.push_back(std::move(seg));
      open = true;
      continue;
    }
    if (!open) {
      SemanticSegment seg;
      seg.title = document_id;
      seg.document_id = document_id;
      segments.push_back(std::move(seg));
      open = true;
    }
    segments.back().block_indices.push_back(i);
  }
  std::erase_if(segments, [](const SemanticSegment& s) { return s.block_indices.empty(); });
  for (std::size_t i = 0; i < segments.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "#s%04zu", i);
    segments[i].segment_id = document_id + buf;
  }
  return segments;
}

// ---------------------------------------------------------------------------
// textualization

std::string textualize_block(const RawBlock& block, const std::string& context_before,
                             const std::string& context_after, TextGenerator& textualizer) {
  if (block.type == BlockType::kText) return block.text;
  const std::string img_path = block.img_path.value_or("");
  GenerationRequest request;
  request.role = GenerationRole::kTextualize;
  request.input = img_path;
  request.context = {context_before, context_after};
  request.label = block_type_name(block.type);
  std::vector<std::string> texts;
  try {
    texts = textualizer.generate_texts(request);
  } catch (const std::exception& e) {
    throw TextualizeError("textualization failed for '" + img_path + "': " + e.what(), img_path);
  }
  if (texts.empty() || trim(texts.front()).empty()) {
    throw TextualizeError("textualizer returned no text for '" + img_path + "'", img_path);
  }
  return texts.front();
}

std::vector<RawBlock> textualize_blocks(std::vector<RawBlock> blocks, TextGenerator& textualizer) {
  // Context is taken from the original neighbours, so results do not depend
  // on processing order.
  std::vector<std::string> original;
  original.reserve(blocks.size());
  for (const auto& b : blocks) original.push_back(b.text);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].type == BlockType::kText) continue;
    const std::string& before = i > 0 ? original[i - 1] : std::string();
    const std::string& after = i + 1 < blocks.size() ? original[i + 1] : std::string();
    blocks[i].text = textualize_block(blocks[i], before, after, textualizer);
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// near-duplicate removal

namespace {

using SparseVec = std::vector<std::pair<std::size_t, double>>;

std::vector<SparseVec> tfidf_vectors(const std::vector<std::string>& texts) {
  std::map<std::string, std::size_t> vocab;
  std::vector<std::map<std::size_t, int>> counts(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (auto& token : tokenize(texts[i])) {
      auto [it, _] = vocab.emplace(std::move(token), vocab.size());
      ++counts[i][it->second];
    }
  }
  std::vector<int> df(vocab.size(), 0);
  for (const auto& c : counts) {
    for (const auto& [term, _] : c) ++df[term];
  }
  const double n = static_cast<double>(texts.size());
  std::vector<SparseVec> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    double norm2 = 0.0;
    for (const auto& [term, tf] : counts[i]) {
      const double idf = std::log((1.0 + n) / (1.0 + df[term])) + 1.0;
      const double w = tf * idf;
      out[i].emplace_back(term, w);
      norm2 += w * w;
    }
    if (norm2 > 0.0) {
      const double norm = std::sqrt(norm2);
      for (auto& [_, w] : out[i]) w /= norm;
    }
  }
  return out;
}

double sparse_dot(const SparseVec& a, const SparseVec& b) {
  double s = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      s += a[i++].second * b[j++].second;
    }
  }
  return s;
}

}  // namespace

std::vector<std::vector<double>> tfidf_cosine_matrix(const std::vector<std::string>& texts) {
  auto vecs = tfidf_vectors(texts);
  std::vector<std::vector<double>> m(texts.size(), std::vector<double>(texts.size(), 0.0));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = i; j < texts.size(); ++j) {
      m[i][j] = m[j][i] = sparse_dot(vecs[i], vecs[j]);
    }
  }
  return m;
}

std::vector<ChunkDraft> dedup_near(const std::vector<ChunkDraft>& drafts, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kArgument, "dedup threshold must lie in (0, 1]");
  }
  std::vector<ChunkDraft> current = drafts;
  while (true) {
    std::vector<std::string> texts;
    texts.reserve(current.size());
    for (const auto& d : current) texts.push_back(d.text);
    const auto vecs = tfidf_vectors(texts);

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < current.size(); ++i) {
      bool duplicate = false;
      for (std::size_t j : kept) {
        if (sparse_dot(vecs[j], vecs[i]) >= threshold) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) kept.push_back(i);
    }
    if (kept.size() == current.size()) return current;
    std::vector<ChunkDraft> next;
    next.reserve(kept.size());
    for (std::size_t i : kept) next.push_back(std::move(current[i]));
    current = std::move(next);
  }
}

// ---------------------------------------------------------------------------
// coreference

bool contains_pronoun(std::string_view text) {
  static const std::unordered_set<std::string> kPronouns = {
      "he",  "she",  "it",  "they",  "we",     "this", "these", "those", "his",
      "her", "hers", "its", "their", "theirs", "our",  "ours",  "him",   "them"};
  for (const auto& token : tokenize(text)) {
    if (kPronouns.count(token)) return true;
  }
  return false;
}

CorefResult resolve_coreferences(const SemanticSegment& segment,
                                 const std::vector<ChunkDraft>& drafts, std::size_t k,
                                 TextGenerator& resolver) {
  CorefResult result;
  result.drafts.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (drafts[i].segment_id != segment.segment_id) {
      throw Error(ErrorCode::kArgument, "draft " + std::to_string(i) + " belongs to segment '" +
                                            drafts[i].segment_id + "', expected '" +
                                            segment.segment_id + "'");
    }
    ChunkDraft draft = drafts[i];
    if (contains_pronoun(draft.text)) {
      GenerationRequest request;
      request.role = GenerationRole::kCoref;
      request.input = draft.text;
      const std::size_t window = std::min(i, k);
      for (std::size_t j = i - window; j < i; ++j) request.context.push_back(result.drafts[j].text);
      ++result.client_calls;
      try {
        auto texts = resolver.generate_texts(request);
        if (texts.empty() || trim(texts.front()).empty()) {
          result.warnings.push_back(segment.segment_id + " draft " + std::to_string(i) +
                                    ": resolver returned no text; kept original");
        } else {
          draft.text = trim(texts.front());
        }
      } catch (const std::exception& e) {
        result.warnings.push_back(segment.segment_id + " draft " + std::to_string(i) +
                                  ": coreference resolution failed: " + e.what());
      }
    }
    result.drafts.push_back(std::move(draft));
  }
  return result;
}

// ---------------------------------------------------------------------------
// summarization

SummaryResult summarize_sections(std::vector<SemanticSegment> segments,
                                 const std::vector<RawBlock>& blocks, TextGenerator& summarizer) {
  SummaryResult result;
  for (auto& seg : segments) {
    std::string text;
    for (std::size_t idx : seg.block_indices) {
      if (idx >= blocks.size()) {
        throw Error(ErrorCode::kArgument, seg.segment_id + ": block index out of range");
      }
      auto piece = trim(blocks[idx].text);
      if (piece.empty()) continue;
      if (!text.empty()) text += ' ';
      text += piece;
    }
    const std::string fallback = seg.title.empty() ? seg.document_id : seg.title;
    seg.summary_degraded = false;
    if (text.empty()) {
      seg.summary = fallback;
      continue;
    }
    GenerationRequest request;
    request.role = GenerationRole::kSummarize;
    request.input = text;
    try {
      auto texts = summarizer.generate_texts(request);
      if (texts.empty() || trim(texts.front()).empty()) {
        throw ClientError("empty summary", false);
      }
      seg.summary = trim(texts.front());
    } catch (const std::exception& e) {
      seg.summary = fallback;
      seg.summary_degraded = true;
      result.warnings.push_back(seg.segment_id + ": summarization failed, using title: " +
                                e.what());
    }
  }
  result.segments = std::move(segments);
  return result;
}

// ---------------------------------------------------------------------------
// segmentation

namespace {

struct Piece {
  std::string text;
  int page;
  BlockType type;
};

std::string join_pieces(std::span<const Piece> pieces) {
  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += ' ';
    out += p.text;
  }
  return out;
}

}  // namespace

std::vector<ChunkDraft> segment_text(std::span<const RawBlock> segment_blocks,
                                     const SemanticSegment& segment,
                                     const SegmentOptions& options,
                                     std::optional<Date> publication_date) {
  if (options.budget < 1) throw Error(ErrorCode::kArgument, "segment budget must be >= 1");
  std::vector<ChunkDraft> drafts;
  auto length = [&](std::span<const Piece> pieces) {
    return measure_length(join_pieces(pieces), options.unit);
  };
  auto emit = [&](std::span<const Piece> pieces) {
    if (pieces.empty()) return;
    ChunkDraft d;
    d.text = join_pieces(pieces);
    d.segment_id = segment.segment_id;
    d.document_id = segment.document_id;
    d.publication_date = publication_date;
    d.page_start = pieces.front().page;
    d.page_end = pieces.front().page;
    for (const auto& p : pieces) {
      d.page_start = std::min(d.page_start, p.page);
      d.page_end = std::max(d.page_end, p.page);
      d.source_types.insert(p.type);
    }
    drafts.push_back(std::move(d));
  };

  std::vector<Piece> current;
  for (const auto& block : segment_blocks) {
    for (auto& sentence : split_sentences(block.text)) {
      current.push_back({std::move(sentence), block.page_idx, block.type});
    }
    while (!current.empty() && length(current) > options.budget) {
      if (current.size() == 1) {
        emit(current);
        current.clear();
        break;
      }
      std::size_t keep = current.size();
      while (keep > 1 && length(std::span<const Piece>(current).first(keep)) > options.budget) {
        --keep;
      }
      emit(std::span<const Piece>(current).first(keep));
      current.erase(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(keep));
    }
  }
  emit(current);
  return drafts;
}

// ---------------------------------------------------------------------------
// chunk assembly

std::vector<Chunk> build_chunks(const std::vector<ChunkDraft>& drafts,
                                const std::vector<SemanticSegment>& segments,
                                Embedder& embedder) {
  std::unordered_map<std::string, const SemanticSegment*> by_id;
  for (const auto& s : segments) by_id[s.segment_id] = &s;
  std::unordered_map<std::string, Vector> meta_cache;
  std::unordered_map<std::string, std::size_t> last_in_document;

  auto embed_one = [&](const std::string& text, const std::string& what) {
    try {
      auto vecs = embedder.embed_texts({text});
      if (vecs.size() != 1) throw ClientError("embedder returned wrong number of vectors", false);
      normalize(vecs.front());
      return std::move(vecs.front());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kClient, "embedding failed for " + what + ": " + e.what());
    }
  };

  std::vector<Chunk> chunks;
  chunks.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& draft = drafts[i];
    const std::string what = "draft " + std::to_string(i) + " (" + draft.segment_id + ")";
    auto it = by_id.find(draft.segment_id);
    if (it == by_id.end()) throw Error(ErrorCode::kArgument, what + ": unknown segment");
    const SemanticSegment& seg = *it->second;
    if (seg.summary.empty()) throw Error(ErrorCode::kArgument, what + ": segment has no summary");
    if (draft.text.empty()) throw Error(ErrorCode::kArgument, what + ": empty text");

    Chunk c;
    c.chunk_id = sha256_hex(draft.text);
    c.text = draft.text;
    c.meta.title = seg.title;
    c.meta.title_summary = seg.summary;
    c.meta.document_id = draft.document_id;
    c.meta.page_start = draft.page_start;
    c.meta.page_end = draft.page_end;
    c.meta.publication_date = draft.publication_date;
    c.meta.segment_id = draft.segment_id;
    c.dense = embed_one(draft.text, what);
    c.sparse = term_frequencies(draft.text);
    auto cached = meta_cache.find(seg.segment_id);
    if (cached == meta_cache.end()) {
      cached = meta_cache
                   .emplace(seg.segment_id,
                            embed_one(seg.title + " " + seg.summary, "metadata of " + seg.segment_id))
                   .first;
    }
    c.meta_dense = cached->second;

    auto last = last_in_document.find(draft.document_id);
    if (last != last_in_document.end()) {
      chunks[last->second].next_id = c.chunk_id;
      c.prev_id = chunks[last->second].chunk_id;
    }
    last_in_document[draft.document_id] = chunks.size();
    chunks.push_back(std::move(c));
  }
  return chunks;
}

// ---------------------------------------------------------------------------

IngestResult ingest_documents(const std::vector<SourceDocument>& documents,
                              const IngestOptions& options, const ModelClients& clients) {
  IngestResult result;
  std::vector<ChunkDraft> drafts;
  for (const auto& doc : documents) {
    auto blocks = textualize_blocks(doc.blocks, *clients.generator);
    auto summarized =
        summarize_sections(group_segments(blocks, doc.document_id), blocks, *clients.generator);
    for (auto& w : summarized.warnings) result.warnings.push_back(std::move(w));
    for (const auto& seg : summarized.segments) {
      const std::size_t first = seg.block_indices.front();
      const std::size_t count = seg.block_indices.back() - first + 1;
      auto seg_drafts = segment_text(std::span<const RawBlock>(blocks).subspan(first, count), seg,
                                     options.segmentation, doc.publication_date);
      drafts.insert(drafts.end(), std::make_move_iterator(seg_drafts.begin()),
                    std::make_move_iterator(seg_drafts.end()));
    }
    result.segments.insert(result.segments.end(), summarized.segments.begin(),
                           summarized.segments.end());
  }
  result.drafts_before_dedup = drafts.size();
  drafts = dedup_near(drafts, options.tau_dedup);
  result.drafts_after_dedup = drafts.size();

  std::unordered_map<std::string, const SemanticSegment*> by_id;
  for (const auto& s : result.segments) by_id[s.segment_id] = &s;
  std::vector<ChunkDraft> resolved;
  resolved.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size();) {
    std::size_t j = i;
    while (j < drafts.size() && drafts[j].segment_id == drafts[i].segment_id) ++j;
    std::vector<ChunkDraft> run(drafts.begin() + static_cast<std::ptrdiff_t>(i),
                                drafts.begin() + static_cast<std::ptrdiff_t>(j));
    auto coref = resolve_coreferences(*by_id.at(drafts[i].segment_id), run, options.coref_k,
                                      *clients.generator);
    for (auto& w : coref.warnings) result.warnings.push_back(std::move(w));
    for (auto& d : coref.drafts) resolved.push_back(std::move(d));
    i = j;
  }
  result.chunks = build_chunks(resolved, result.segments, *clients.embedder);
  return result;
}

}  // namespace finsage
