#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "finsage/store.hpp"

namespace finsage {

using IdSet = std::set<std::string>;
using RankedList = std::vector<std::string>;

struct SetMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_retrieved = 0;
};

/// Requires a non-empty relevant set.
SetMetrics set_metrics(const IdSet& retrieved, const IdSet& relevant);

/// Correct items in the top-K list divided by min(|relevant|, K).
double normalized_recall(const RankedList& ranked_top_k, const IdSet& relevant, std::size_t k);

/// Reciprocal rank of the first relevant item; 0 when none.
double mrr(const RankedList& ranked, const IdSet& relevant);

/// Binary-relevance nDCG. Each id counts once (at its first position); the
/// ideal DCG places all |relevant| items first.
double binary_ndcg(const RankedList& ranked, const IdSet& relevant);

// ---------------------------------------------------------------------------
// Retrieval-path overlap

/// For one query: which relevant chunks each path retrieved.
using PathRelevantSets = std::map<RetrievalPath, IdSet>;

struct OverlapCell {
  std::uint8_t paths = 0;  // bitmask over RetrievalPath
  std::size_t count = 0;
  double percentage = 0.0;
};

/// Assigns every retrieved relevant (query, chunk) pair to the exact subset of
/// paths that found it. Non-empty cells only, ascending by mask.
std::vector<OverlapCell> overlap_partition(const std::vector<PathRelevantSets>& per_query);

}  // namespace finsage
