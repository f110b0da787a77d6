#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "finsage/clients.hpp"
#include "finsage/store.hpp"
#include "json.hpp"

namespace finsage {

struct QueryPlan {
  std::string original_query;
  std::vector<std::string> sub_queries;
  bool history_used = false;
  bool degraded = false;
};

/// Decomposes a query into self-contained sub-queries (one per output line
/// of the paraphraser). Falls back to the original query on client failure.
QueryPlan paraphrase_query(const std::string& query, const std::vector<std::string>& history,
                           TextGenerator& paraphraser);

// Per-path top-K; a K of zero disables that path.
struct RetrievalConfig {
  std::size_t k_dense = 10;
  std::size_t k_bm25 = 10;
  std::size_t k_meta = 3;
  std::size_t k_hyde = 10;
  std::size_t hyde_hypotheses = 3;
};

struct RetrievedSet {
  std::string sub_query;
  std::vector<SearchHit> hits;  // all paths, each path's hits ranked 1..n
  RetrievalConfig config;
  std::vector<std::string> errors;

  std::vector<SearchHit> path_hits(RetrievalPath path) const;
};

/// HyDE: embed n generated hypothetical answers, search with each, keep the
/// best score per chunk, rank and truncate to k.
std::vector<SearchHit> retrieve_hyde(const std::string& sub_query, std::size_t n_hypotheses,
                                     TextGenerator& generator, Embedder& embedder,
                                     const ChunkStore& store, std::size_t k);

/// Runs the dense, BM25, metadata and HyDE paths for one sub-query. A failing
/// path contributes no hits and records an error; if every enabled path fails
/// the call throws.
RetrievedSet retrieve_paths(const std::string& sub_query, const ChunkStore& store,
                            const ModelClients& clients, const RetrievalConfig& config);

struct Candidate {
  std::string chunk_id;
  std::uint8_t paths = 0;  // bit i set when RetrievalPath(i) found the chunk
  int best_rank = 0;
  RetrievalPath best_path = RetrievalPath::kDense;

  bool has_path(RetrievalPath p) const { return paths & (1u << static_cast<int>(p)); }
};

std::vector<std::string> path_names(std::uint8_t mask);

/// Set union by chunk_id, ordered by best rank, then path priority
/// (dense, bm25, metadata, hyde), then chunk_id.
std::vector<Candidate> union_candidates(const std::vector<SearchHit>& hits);

struct Bundle {
  std::string seed_chunk_id;
  std::vector<std::string> member_ids;  // document order
  std::string combined_text;
};

/// Grows each seed by alternately testing its previous then next neighbour,
/// absorbing a neighbour when cos(seed, neighbour) >= threshold. A direction
/// closes at its first failure; growth stops at bundle_limit members.
std::vector<Bundle> expand_bundles(const std::vector<Candidate>& candidates,
                                   const ChunkStore& store, double threshold,
                                   std::size_t bundle_limit);

nlohmann::ordered_json hits_to_json(const std::vector<SearchHit>& hits);
nlohmann::ordered_json retrieved_set_to_json(const RetrievedSet& set);

}  // namespace finsage
