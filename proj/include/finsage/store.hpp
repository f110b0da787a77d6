#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "finsage/chunk.hpp"
#include "json.hpp"

namespace finsage {

enum class RetrievalPath { kDense = 0, kBm25 = 1, kMetadata = 2, kHyde = 3 };

inline constexpr RetrievalPath kAllPaths[] = {RetrievalPath::kDense, RetrievalPath::kBm25,
                                              RetrievalPath::kMetadata, RetrievalPath::kHyde};

const char* path_name(RetrievalPath path);
std::optional<RetrievalPath> parse_path(std::string_view name);

struct SearchHit {
  std::string chunk_id;
  double score = 0.0;
  RetrievalPath path = RetrievalPath::kDense;
  int rank = 0;  // 1-based

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

struct DocumentEntry {
  std::string document_id;
  std::optional<Date> publication_date;
};

struct StoreManifest {
  static constexpr int kFormatVersion = 1;

  std::size_t chunk_count = 0;
  std::vector<DocumentEntry> documents;
  std::size_t embedding_dim = 0;
  Bm25Params bm25;
  int format_version = kFormatVersion;
};

nlohmann::ordered_json manifest_to_json(const StoreManifest& manifest);

struct UpsertReport {
  std::size_t inserted = 0;
  std::size_t replaced = 0;
  std::size_t skipped = 0;
};

enum class Direction { kPrev, kNext };

// In-memory chunk store with exhaustive dense search, an Okapi BM25 inverted
// index over refined text, and segment-level metadata search. Const member
// functions never mutate, so a store can be shared read-only across threads;
// upserts need exclusive access.
class ChunkStore {
 public:
  explicit ChunkStore(Bm25Params params = {});

  /// Exact-hash de-duplication: an existing chunk_id is replaced only by a
  /// strictly newer publication date. The whole batch is rejected with
  /// DimensionError if any vector disagrees with the store's dimension.
  UpsertReport upsert_chunks(const std::vector<Chunk>& chunks);

  std::vector<SearchHit> dense_search(const Vector& query, std::size_t k) const;
  std::vector<SearchHit> bm25_search(const std::vector<std::string>& query_terms,
                                     std::size_t k) const;
  /// Top k_meta segments by metadata-embedding cosine, expanded to all of
  /// their chunks in segment order.
  std::vector<SearchHit> metadata_search(const Vector& query, std::size_t k_meta) const;

  /// Linked neighbour, or nullptr at a document boundary. Throws
  /// Error(kNotFound) for an unknown id.
  const Chunk* get_neighbors(const std::string& chunk_id, Direction direction) const;

  const Chunk* find(const std::string& chunk_id) const;
  const Chunk& at(const std::string& chunk_id) const;
  const std::vector<Chunk>& chunks() const { return chunks_; }
  std::vector<const Chunk*> segment_chunks(const std::string& segment_id) const;

  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  std::size_t embedding_dim() const { return dim_; }
  const Bm25Params& bm25_params() const { return params_; }

  double idf(const std::string& term) const;
  double average_length() const { return avg_len_; }

  StoreManifest manifest() const;

  void save(const std::filesystem::path& path) const;
  static ChunkStore load(const std::filesystem::path& path);

 private:
  struct Posting {
    std::size_t doc;
    int tf;
  };

  void rebuild();

  Bm25Params params_;
  std::size_t dim_ = 0;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<double> doc_len_;
  double avg_len_ = 0.0;
  std::vector<std::string> segment_order_;
  std::unordered_map<std::string, std::vector<std::size_t>> segments_;
};

/// Orders hits by descending score then ascending chunk_id and assigns
/// ranks 1..n after truncating to k.
void sort_and_rank(std::vector<SearchHit>& hits, std::size_t k);

}  // namespace finsage
