#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finsage/clients.hpp"
#include "finsage/queries.hpp"
#include "finsage/store.hpp"
#include "finsage/text.hpp"
#include "json.hpp"

namespace finsage {

/// Linear recency bonus: max(0, 1 - days/365) with days clamped at zero for
/// future dates; 0 when the date is unknown.
double time_bonus(const std::optional<Date>& publication_date, const Date& query_time);

double sigmoid(double x);

// A scoring unit: a bundle (seed id, combined text) or a single chunk.
struct RerankItem {
  std::string id;
  std::string text;
  std::optional<Date> publication_date;
  std::vector<std::string> member_ids;
};

struct ScoredCandidate {
  RerankItem item;
  double raw_logit = 0.0;
  double time_bonus = 0.0;
  double final_score = 0.5;  // sigmoid(raw_logit + beta * time_bonus)

  double pre_activation(double beta) const { return raw_logit + beta * time_bonus; }
};

ScoredCandidate score_candidate(const std::string& query, const RerankItem& item,
                                CrossEncoder& scorer, double beta, const Date& query_time);

struct RerankResult {
  std::vector<ScoredCandidate> ranked;
  std::vector<std::string> warnings;
};

/// Scores every item and returns the best min(k, n) by descending final
/// score, ties by ascending id. Items whose scoring fails are dropped with a
/// warning.
RerankResult rerank_top_k(const std::vector<RerankItem>& items, const std::string& query,
                          CrossEncoder& scorer, std::size_t k, double beta,
                          const Date& query_time);

// ---------------------------------------------------------------------------
// Preference data

struct PreferencePair {
  std::string query;
  std::vector<std::string> pos;  // exactly one
  std::vector<std::string> neg;  // at least one
  std::optional<std::vector<double>> pos_scores;
  std::optional<std::vector<double>> neg_scores;
  std::optional<std::string> prompt;

  /// Throws Error(kInput) when |pos| != 1, neg is empty, or pos is in neg.
  void validate() const;
};

nlohmann::ordered_json preference_to_json(const PreferencePair& pair);
PreferencePair preference_from_json(const nlohmann::json& j);
void write_preference_jsonl(std::ostream& out, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_preference_jsonl(std::istream& in);

/// Relevance probability of a passage for a query, in (0, 1).
using PairScorer = std::function<double(const std::string& query, const std::string& passage)>;

/// -log(k_pos / (k_pos + k_neg)). Throws Error(kDomain) outside (0, 1).
double dpo_term(double k_pos, double k_neg);

/// Mean of dpo_term over every (positive, negative) combination.
double dpo_loss(const std::vector<PreferencePair>& pairs, const PairScorer& scorer);

struct PreferenceBuild {
  std::vector<PreferencePair> pairs;
  std::vector<std::string> warnings;
};

/// One pair per (query, relevant chunk found in its trace); negatives are a
/// seeded sample of the trace's non-relevant chunks, round(ratio) per pair.
PreferenceBuild build_preference_dataset(const std::vector<EvalQuery>& queries,
                                         const std::vector<std::vector<std::string>>& traces,
                                         const ChunkStore& store, double balance_ratio,
                                         std::uint64_t seed);

}  // namespace finsage
