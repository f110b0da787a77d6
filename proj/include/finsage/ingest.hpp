#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finsage/chunk.hpp"
#include "finsage/clients.hpp"
#include "finsage/text.hpp"
#include "json.hpp"

namespace finsage {

enum class BlockType { kText, kTable, kImage };

const char* block_type_name(BlockType type);

// One element of a MinerU content_list.json array.
struct RawBlock {
  BlockType type = BlockType::kText;
  std::string text;
  std::optional<int> text_level;
  int page_idx = 0;
  std::optional<std::string> img_path;
  nlohmann::json extras = nlohmann::json::object();

  bool is_heading() const { return type == BlockType::kText && text_level.has_value(); }
};

/// Blocks in array (reading) order. Throws ParseError with the byte offset
/// on malformed JSON, Error(kSchema) naming the block index on bad records.
std::vector<RawBlock> parse_content_list(std::string_view bytes);

struct SemanticSegment {
  std::string segment_id;
  std::string title;
  std::string summary;
  std::string document_id;
  std::vector<std::size_t> block_indices;  // contiguous, reading order
  bool summary_degraded = false;
};

/// Splits a block stream at heading blocks. Headings become segment titles
/// and are not members; leading blocks without a heading get the document
/// id as their title.
std::vector<SemanticSegment> group_segments(const std::vector<RawBlock>& blocks,
                                            const std::string& document_id);

struct ChunkDraft {
  std::string text;
  std::string segment_id;
  std::string document_id;
  int page_start = 0;
  int page_end = 0;
  std::optional<Date> publication_date;
  std::set<BlockType> source_types;
};

/// Narrative text for a table or image block. Text blocks pass through
/// without touching the client.
std::string textualize_block(const RawBlock& block, const std::string& context_before,
                             const std::string& context_after, TextGenerator& textualizer);

/// textualize_block over a whole document, using the neighbouring blocks'
/// text as context.
std::vector<RawBlock> textualize_blocks(std::vector<RawBlock> blocks, TextGenerator& textualizer);

/// Near-duplicate removal over TF-IDF cosine similarity. The earlier draft of
/// a pair at or above `threshold` survives. Repeats until no pair of the
/// survivors (with TF-IDF refit on them) reaches the threshold.
std::vector<ChunkDraft> dedup_near(const std::vector<ChunkDraft>& drafts, double threshold);

/// Smoothed TF-IDF cosine between every pair of texts.
std::vector<std::vector<double>> tfidf_cosine_matrix(const std::vector<std::string>& texts);

bool contains_pronoun(std::string_view text);

struct CorefResult {
  std::vector<ChunkDraft> drafts;
  std::vector<std::string> warnings;
  std::size_t client_calls = 0;
};

/// Rewrites each draft that contains a pronoun, passing the resolver up to
/// k preceding (already resolved) drafts from the same segment.
CorefResult resolve_coreferences(const SemanticSegment& segment,
                                 const std::vector<ChunkDraft>& drafts, std::size_t k,
                                 TextGenerator& resolver);

struct SummaryResult {
  std::vector<SemanticSegment> segments;
  std::vector<std::string> warnings;
};

/// Fills every segment's summary from its member blocks' text. Falls back to
/// the title when the text is empty or the client fails.
SummaryResult summarize_sections(std::vector<SemanticSegment> segments,
                                 const std::vector<RawBlock>& blocks, TextGenerator& summarizer);

struct SegmentOptions {
  std::size_t budget = 200;
  LengthUnit unit = LengthUnit::kCharacters;
};

/// Packs a segment's blocks into drafts: a draft under budget absorbs the
/// following block; a draft over budget hands trailing sentences to the next
/// draft until it fits or one sentence remains.
std::vector<ChunkDraft> segment_text(std::span<const RawBlock> segment_blocks,
                                     const SemanticSegment& segment,
                                     const SegmentOptions& options,
                                     std::optional<Date> publication_date = std::nullopt);

/// Finished chunks with embeddings, sparse terms and prev/next links between
/// consecutive drafts of the same document.
std::vector<Chunk> build_chunks(const std::vector<ChunkDraft>& drafts,
                                const std::vector<SemanticSegment>& segments,
                                Embedder& embedder);

// ---------------------------------------------------------------------------
// Whole-pipeline driver

struct SourceDocument {
  std::string document_id;
  std::optional<Date> publication_date;
  std::vector<RawBlock> blocks;
};

struct IngestOptions {
  double tau_dedup = 0.7;
  std::size_t coref_k = 4;
  SegmentOptions segmentation;
};

struct IngestResult {
  std::vector<Chunk> chunks;
  std::vector<SemanticSegment> segments;
  std::vector<std::string> warnings;
  std::size_t drafts_before_dedup = 0;
  std::size_t drafts_after_dedup = 0;
};

IngestResult ingest_documents(const std::vector<SourceDocument>& documents,
                              const IngestOptions& options, const ModelClients& clients);

}  // namespace finsage
