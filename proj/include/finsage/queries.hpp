#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace finsage {

// One annotated evaluation query.
struct EvalQuery {
  std::string query_id;
  std::string query;
  std::vector<std::string> relevant_chunk_ids;  // non-empty
  std::optional<std::string> reference_answer;
};

/// JSONL {query_id, query, relevant_chunk_ids[], reference_answer?}.
/// Throws Error(kInput) naming the line on any violation.
std::vector<EvalQuery> read_eval_queries(std::istream& in);

}  // namespace finsage
