#include "finsage/metrics.hpp"

#include <cmath>

#include "finsage/errors.hpp"

namespace finsage {

SetMetrics set_metrics(const IdSet& retrieved, const IdSet& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::kArgument, "relevant set must be non-empty");
  std::size_t hit = 0;
  for (const auto& id : retrieved) hit += relevant.count(id);
  SetMetrics m;
  m.num_retrieved = retrieved.size();
  m.recall = static_cast<double>(hit) / static_cast<double>(relevant.size());
  m.precision = retrieved.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(retrieved.size());
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double normalized_recall(const RankedList& ranked_top_k, const IdSet& relevant, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kArgument, "K must be >= 1");
  if (ranked_top_k.size() > k) {
    throw Error(ErrorCode::kArgument, "ranked list is longer than K");
  }
  if (relevant.empty()) return 0.0;
  IdSet correct;
  for (const auto& id : ranked_top_k) {
    if (relevant.count(id)) correct.insert(id);
  }
  return static_cast<double>(correct.size()) /
         static_cast<double>(std::min(relevant.size(), k));
}

double mrr(const RankedList& ranked, const IdSet& relevant) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double binary_ndcg(const RankedList& ranked, const IdSet& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::kArgument, "relevant set must be non-empty");
  double dcg = 0.0;
  IdSet seen;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.count(ranked[i]) && seen.insert(ranked[i]).second) {
      dcg += 1.0 / std::log2(static_cast<double>(i + 2));
    }
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < relevant.size(); ++i) idcg += 1.0 / std::log2(static_cast<double>(i + 2));
  return dcg / idcg;
}

std::vector<OverlapCell> overlap_partition(const std::vector<PathRelevantSets>& per_query) {
  std::map<std::uint8_t, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sets : per_query) {
    std::map<std::string, std::uint8_t> masks;
    for (const auto& [path, ids] : sets) {
      for (const auto& id : ids) masks[id] |= static_cast<std::uint8_t>(1u << static_cast<int>(path));
    }
    for (const auto& [id, mask] : masks) {
      ++counts[mask];
      ++total;
    }
  }
  std::vector<OverlapCell> cells;
  for (const auto& [mask, count] : counts) {
    cells.push_back({mask, count, 100.0 * static_cast<double>(count) / static_cast<double>(total)});
  }
  return cells;
}

}  // namespace finsage
