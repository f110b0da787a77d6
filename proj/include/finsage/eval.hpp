#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finsage/engine.hpp"
#include "finsage/metrics.hpp"
#include "finsage/queries.hpp"
#include "json.hpp"

namespace finsage {

struct QueryRow {
  std::string query_id;
  std::vector<std::string> sub_queries;
  SetMetrics set;  // over the full post-union, post-bundling chunk set
  std::size_t k_effective = 0;
  double normalized_recall = 0.0;  // over the re-ranked top-K list
  double mrr = 0.0;
  double binary_ndcg = 0.0;
  std::map<RetrievalPath, double> path_recall;
  std::vector<std::string> ranked_chunk_ids;
};

struct RetrievalAggregates {
  double avg_recall = 0.0;
  double avg_precision = 0.0;
  double avg_f1 = 0.0;
  double avg_num_retrieved = 0.0;
  double normalized_recall = 0.0;
  double mrr = 0.0;
  double binary_ndcg = 0.0;
  std::map<RetrievalPath, double> path_avg_recall;
};

struct EvalReport {
  std::vector<QueryRow> rows;
  RetrievalAggregates aggregates;
  std::vector<OverlapCell> overlap;
  nlohmann::ordered_json config_snapshot;
};

/// Ranking metrics for one query on a top-K list. With several sub-queries
/// the list budget and the normalized-recall cap scale with their count.
struct RankMetrics {
  double precision = 0.0;
  double normalized_recall = 0.0;
  double mrr = 0.0;
  double binary_ndcg = 0.0;
};

RankMetrics rank_metrics(const RankedList& ranked, const IdSet& relevant, std::size_t k_effective);

/// Runs the full pipeline per query with re-ranking at the configured K.
EvalReport evaluate_retrieval(const std::vector<EvalQuery>& queries, const Engine& engine);

nlohmann::ordered_json eval_report_to_json(const EvalReport& report);

struct RerankKResult {
  std::size_t k = 0;
  RankMetrics mean;
  std::vector<std::pair<std::string, RankMetrics>> per_query;
};

struct RerankReport {
  std::vector<RerankKResult> per_k;
  nlohmann::ordered_json config_snapshot;
};

/// Retrieves once per query, then re-ranks the same candidates at every K.
RerankReport evaluate_rerank(const std::vector<EvalQuery>& queries, const Engine& engine,
                             const std::vector<std::size_t>& k_list);

nlohmann::ordered_json rerank_report_to_json(const RerankReport& report);

/// Config as used by a run, with the query time resolved so the snapshot
/// reproduces the run on any later day.
nlohmann::ordered_json run_config_snapshot(const EngineConfig& config);

// ---------------------------------------------------------------------------
// LLM-judge request records (schema only; judging is external)

struct JudgeInput {
  std::string question;
  std::string answer;
  std::optional<std::string> reference;
  std::vector<std::string> context;
};

nlohmann::ordered_json judge_request_to_json(const JudgeInput& input);
void emit_judge_requests(std::ostream& out, const std::vector<JudgeInput>& inputs);

}  // namespace finsage
