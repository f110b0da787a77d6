#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finsage/clients.hpp"
#include "finsage/config.hpp"
#include "finsage/rerank.hpp"
#include "finsage/retrieval.hpp"
#include "finsage/store.hpp"
#include "json.hpp"

namespace finsage {

struct SubQueryResult {
  RetrievedSet retrieved;
  std::vector<Candidate> candidates;
  std::vector<Bundle> bundles;
  RerankResult reranked;  // empty when re-ranking was not requested
};

struct QueryResult {
  QueryPlan plan;
  std::vector<SubQueryResult> sub_results;

  /// Distinct chunk ids over every sub-query's candidates and bundle members,
  /// in first-seen order.
  std::vector<std::string> retrieved_chunk_ids() const;

  /// Distinct chunk ids found by one path across sub-queries.
  std::vector<std::string> path_chunk_ids(RetrievalPath path) const;

  /// Re-ranked items of all sub-queries, flattened to member chunk ids and
  /// de-duplicated, in rank order.
  std::vector<std::string> ranked_chunk_ids() const;

  std::vector<std::string> warnings() const;
};

// Query-time pipeline over an immutable store snapshot. All const methods
// are safe to call concurrently when the clients are.
class Engine {
 public:
  Engine(EngineConfig config, std::shared_ptr<const ChunkStore> store, ModelClients clients);

  const EngineConfig& config() const { return config_; }
  const ChunkStore& store() const { return *store_; }
  const ModelClients& clients() const { return clients_; }

  /// Paraphrase, retrieve over every path, union and bundle. When rerank_k
  /// is set each sub-query's items are also re-ranked to that many.
  QueryResult run(const std::string& query, std::optional<std::size_t> rerank_k = std::nullopt,
                  const std::vector<std::string>& history = {}) const;

  /// Re-ranking units for one sub-query: bundles, or raw candidates when
  /// bundle re-ranking is switched off.
  std::vector<RerankItem> rerank_items(const SubQueryResult& sub) const;

  RerankResult rerank(const SubQueryResult& sub, std::size_t k) const;

 private:
  EngineConfig config_;
  std::shared_ptr<const ChunkStore> store_;
  ModelClients clients_;
};

nlohmann::ordered_json candidates_to_json(const std::vector<Candidate>& candidates);
nlohmann::ordered_json bundles_to_json(const std::vector<Bundle>& bundles);
nlohmann::ordered_json ranked_to_json(const RerankResult& result, const ChunkStore& store);

/// Full per-sub-query trace: path hits, candidates, bundles and (when
/// present) re-ranked results with provenance.
nlohmann::ordered_json query_result_to_json(const QueryResult& result, const ChunkStore& store);

}  // namespace finsage
