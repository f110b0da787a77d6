#include "finsage/eval.hpp"

#include <set>

#include "finsage/errors.hpp"

namespace finsage {

std::vector<EvalQuery> read_eval_queries(std::istream& in) {
  std::vector<EvalQuery> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "queries line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kInput, where + e.what());
    }
    EvalQuery q;
    try {
      q.query_id = j.at("query_id").get<std::string>();
      q.query = j.at("query").get<std::string>();
      q.relevant_chunk_ids = j.at("relevant_chunk_ids").get<std::vector<std::string>>();
      if (j.contains("reference_answer") && !j["reference_answer"].is_null()) {
        q.reference_answer = j["reference_answer"].get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInput, where + e.what());
    }
    if (q.query.empty()) throw Error(ErrorCode::kInput, where + "empty query");
    if (q.relevant_chunk_ids.empty()) throw Error(ErrorCode::kInput, where + "relevant_chunk_ids is empty");
    if (!ids.insert(q.query_id).second) {
      throw Error(ErrorCode::kInput, where + "duplicate query_id '" + q.query_id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

RankMetrics rank_metrics(const RankedList& ranked, const IdSet& relevant, std::size_t k_effective) {
  RankedList top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(ranked.size(), k_effective)));
  RankMetrics m;
  std::size_t hit = 0;
  for (const auto& id : top) hit += relevant.count(id);
  m.precision = top.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(top.size());
  m.normalized_recall = normalized_recall(top, relevant, k_effective);
  m.mrr = mrr(top, relevant);
  m.binary_ndcg = binary_ndcg(top, relevant);
  return m;
}

nlohmann::ordered_json run_config_snapshot(const EngineConfig& config) {
  EngineConfig resolved = config;
  resolved.rerank.query_time = config.effective_query_time();
  return config_to_json(resolved);
}

EvalReport evaluate_retrieval(const std::vector<EvalQuery>& queries, const Engine& engine) {
  if (queries.empty()) throw Error(ErrorCode::kInput, "no evaluation queries");
  EvalReport report;
  report.config_snapshot = run_config_snapshot(engine.config());
  std::vector<PathRelevantSets> overlap_input;
  const std::size_t rerank_k = engine.config().rerank.k;
  for (const auto& q : queries) {
    const IdSet relevant(q.relevant_chunk_ids.begin(), q.relevant_chunk_ids.end());
    const auto result = engine.run(q.query, rerank_k);
    const auto retrieved = result.retrieved_chunk_ids();
    QueryRow row;
    row.query_id = q.query_id;
    row.sub_queries = result.plan.sub_queries;
    row.set = set_metrics(IdSet(retrieved.begin(), retrieved.end()), relevant);
    row.k_effective = rerank_k * result.plan.sub_queries.size();
    row.ranked_chunk_ids = result.ranked_chunk_ids();
    if (row.ranked_chunk_ids.size() > row.k_effective) row.ranked_chunk_ids.resize(row.k_effective);
    const auto rm = rank_metrics(row.ranked_chunk_ids, relevant, row.k_effective);
    row.normalized_recall = rm.normalized_recall;
    row.mrr = rm.mrr;
    row.binary_ndcg = rm.binary_ndcg;
    PathRelevantSets per_path;
    for (auto path : kAllPaths) {
      const auto ids = result.path_chunk_ids(path);
      row.path_recall[path] = set_metrics(IdSet(ids.begin(), ids.end()), relevant).recall;
      IdSet found;
      for (const auto& id : ids) {
        if (relevant.count(id)) found.insert(id);
      }
      if (!found.empty()) per_path[path] = std::move(found);
    }
    overlap_input.push_back(std::move(per_path));
    report.rows.push_back(std::move(row));
  }
  auto& a = report.aggregates;
  for (const auto& row : report.rows) {
    a.avg_recall += row.set.recall;
    a.avg_precision += row.set.precision;
    a.avg_f1 += row.set.f1;
    a.avg_num_retrieved += static_cast<double>(row.set.num_retrieved);
    a.normalized_recall += row.normalized_recall;
    a.mrr += row.mrr;
    a.binary_ndcg += row.binary_ndcg;
    for (const auto& [path, r] : row.path_recall) a.path_avg_recall[path] += r;
  }
  const double n = static_cast<double>(report.rows.size());
  for (double* v : {&a.avg_recall, &a.avg_precision, &a.avg_f1, &a.avg_num_retrieved,
                    &a.normalized_recall, &a.mrr, &a.binary_ndcg}) {
    *v /= n;
  }
  for (auto& [_, r] : a.path_avg_recall) r /= n;
  report.overlap = overlap_partition(overlap_input);
  return report;
}

namespace {

nlohmann::ordered_json path_map_json(const std::map<RetrievalPath, double>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto path : kAllPaths) {
    auto it = m.find(path);
    j[path_name(path)] = it == m.end() ? 0.0 : it->second;
  }
  return j;
}

nlohmann::ordered_json rank_metrics_json(const RankMetrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["normalized_recall"] = m.normalized_recall;
  j["mrr"] = m.mrr;
  j["binary_ndcg"] = m.binary_ndcg;
  return j;
}

}  // namespace

nlohmann::ordered_json eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = "retrieval";
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["query_id"] = r.query_id;
    row["sub_queries"] = r.sub_queries;
    row["recall"] = r.set.recall;
    row["precision"] = r.set.precision;
    row["f1"] = r.set.f1;
    row["num_retrieved"] = r.set.num_retrieved;
    row["k_effective"] = r.k_effective;
    row["normalized_recall"] = r.normalized_recall;
    row["mrr"] = r.mrr;
    row["binary_ndcg"] = r.binary_ndcg;
    row["path_recall"] = path_map_json(r.path_recall);
    row["ranked_chunk_ids"] = r.ranked_chunk_ids;
    rows.push_back(std::move(row));
  }
  j["queries"] = std::move(rows);
  const auto& a = report.aggregates;
  nlohmann::ordered_json agg;
  agg["avg_recall"] = a.avg_recall;
  agg["avg_precision"] = a.avg_precision;
  agg["avg_f1"] = a.avg_f1;
  agg["avg_num_retrieved"] = a.avg_num_retrieved;
  agg["normalized_recall"] = a.normalized_recall;
  agg["mrr"] = a.mrr;
  agg["binary_ndcg"] = a.binary_ndcg;
  agg["path_avg_recall"] = path_map_json(a.path_avg_recall);
  j["aggregates"] = std::move(agg);
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : report.overlap) {
    nlohmann::ordered_json cell;
    cell["paths"] = path_names(c.paths);
    cell["count"] = c.count;
    cell["percentage"] = c.percentage;
    cells.push_back(std::move(cell));
  }
  j["overlap"] = std::move(cells);
  j["config"] = report.config_snapshot;
  return j;
}

RerankReport evaluate_rerank(const std::vector<EvalQuery>& queries, const Engine& engine,
                             const std::vector<std::size_t>& k_list) {
  if (queries.empty()) throw Error(ErrorCode::kInput, "no evaluation queries");
  if (k_list.empty()) throw Error(ErrorCode::kArgument, "K list is empty");
  RerankReport report;
  report.config_snapshot = run_config_snapshot(engine.config());
  std::vector<QueryResult> traces;
  traces.reserve(queries.size());
  for (const auto& q : queries) traces.push_back(engine.run(q.query));
  for (std::size_t k : k_list) {
    if (k < 1) throw Error(ErrorCode::kArgument, "K must be >= 1");
    RerankKResult kr;
    kr.k = k;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      QueryResult trace = traces[qi];
      for (auto& sub : trace.sub_results) sub.reranked = engine.rerank(sub, k);
      const IdSet relevant(queries[qi].relevant_chunk_ids.begin(), queries[qi].relevant_chunk_ids.end());
      const auto m = rank_metrics(trace.ranked_chunk_ids(), relevant, k * trace.sub_results.size());
      kr.mean.precision += m.precision;
      kr.mean.normalized_recall += m.normalized_recall;
      kr.mean.mrr += m.mrr;
      kr.mean.binary_ndcg += m.binary_ndcg;
      kr.per_query.emplace_back(queries[qi].query_id, m);
    }
    const double n = static_cast<double>(queries.size());
    kr.mean.precision /= n;
    kr.mean.normalized_recall /= n;
    kr.mean.mrr /= n;
    kr.mean.binary_ndcg /= n;
    report.per_k.push_back(std::move(kr));
  }
  return report;
}

nlohmann::ordered_json rerank_report_to_json(const RerankReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = "rerank";
  auto per_k = nlohmann::ordered_json::array();
  for (const auto& kr : report.per_k) {
    nlohmann::ordered_json entry;
    entry["k"] = kr.k;
    entry["aggregates"] = rank_metrics_json(kr.mean);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& [id, m] : kr.per_query) {
      auto row = rank_metrics_json(m);
      row["query_id"] = id;
      rows.push_back(std::move(row));
    }
    entry["queries"] = std::move(rows);
    per_k.push_back(std::move(entry));
  }
  j["per_k"] = std::move(per_k);
  j["config"] = report.config_snapshot;
  return j;
}

nlohmann::ordered_json judge_request_to_json(const JudgeInput& input) {
  nlohmann::ordered_json j;
  j["question"] = input.question;
  j["answer"] = input.answer;
  j["reference"] = input.reference ? nlohmann::ordered_json(*input.reference) : nlohmann::ordered_json(nullptr);
  j["context"] = input.context;
  j["status"] = nullptr;
  j["feedback"] = nullptr;
  return j;
}

void emit_judge_requests(std::ostream& out, const std::vector<JudgeInput>& inputs) {
  for (const auto& in : inputs) out << judge_request_to_json(in).dump() << '\n';
}

}  // namespace finsage
