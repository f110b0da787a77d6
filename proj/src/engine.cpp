#include "finsage/engine.hpp"

#include <set>
#include <utility>

#include "finsage/errors.hpp"

namespace finsage {

namespace {

void append_unique(std::vector<std::string>& out, std::set<std::string>& seen, const std::string& id) {
  if (seen.insert(id).second) out.push_back(id);
}

}  // namespace

std::vector<std::string> QueryResult::retrieved_chunk_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& sub : sub_results) {
    for (const auto& c : sub.candidates) append_unique(out, seen, c.chunk_id);
    for (const auto& b : sub.bundles) {
      for (const auto& id : b.member_ids) append_unique(out, seen, id);
    }
  }
  return out;
}

std::vector<std::string> QueryResult::path_chunk_ids(RetrievalPath path) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& sub : sub_results) {
    for (const auto& hit : sub.retrieved.path_hits(path)) append_unique(out, seen, hit.chunk_id);
  }
  return out;
}

std::vector<std::string> QueryResult::ranked_chunk_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& sub : sub_results) {
    for (const auto& scored : sub.reranked.ranked) {
      for (const auto& id : scored.item.member_ids) append_unique(out, seen, id);
    }
  }
  return out;
}

std::vector<std::string> QueryResult::warnings() const {
  std::vector<std::string> out;
  if (plan.degraded) out.push_back("query decomposition failed; used the original query");
  for (const auto& sub : sub_results) {
    for (const auto& e : sub.retrieved.errors) out.push_back(sub.retrieved.sub_query + ": " + e);
    for (const auto& w : sub.reranked.warnings) out.push_back(sub.retrieved.sub_query + ": " + w);
  }
  return out;
}

Engine::Engine(EngineConfig config, std::shared_ptr<const ChunkStore> store, ModelClients clients)
    : config_(std::move(config)), store_(std::move(store)), clients_(std::move(clients)) {
  if (!store_) throw Error(ErrorCode::kArgument, "engine needs a store");
  if (!clients_.embedder || !clients_.generator || !clients_.cross_encoder) {
    throw Error(ErrorCode::kArgument, "engine needs all three model clients");
  }
}

QueryResult Engine::run(const std::string& query, std::optional<std::size_t> rerank_k,
                        const std::vector<std::string>& history) const {
  if (store_->empty()) throw Error(ErrorCode::kEmptyStore, "the chunk store is empty");
  QueryResult result;
  result.plan = paraphrase_query(query, history, *clients_.generator);
  for (const auto& sub_query : result.plan.sub_queries) {
    SubQueryResult sub;
    sub.retrieved = retrieve_paths(sub_query, *store_, clients_, config_.retrieval);
    sub.candidates = union_candidates(sub.retrieved.hits);
    sub.bundles = expand_bundles(sub.candidates, *store_, config_.thresholds.tau_exp,
                                 config_.thresholds.bundle_limit);
    if (rerank_k) sub.reranked = rerank(sub, *rerank_k);
    result.sub_results.push_back(std::move(sub));
  }
  return result;
}

std::vector<RerankItem> Engine::rerank_items(const SubQueryResult& sub) const {
  std::vector<RerankItem> items;
  if (config_.rerank.rerank_bundles) {
    for (const auto& b : sub.bundles) {
      items.push_back({b.seed_chunk_id, b.combined_text, store_->at(b.seed_chunk_id).meta.publication_date,
                       b.member_ids});
    }
  } else {
    for (const auto& c : sub.candidates) {
      const auto& chunk = store_->at(c.chunk_id);
      items.push_back({c.chunk_id, chunk.text, chunk.meta.publication_date, {c.chunk_id}});
    }
  }
  return items;
}

RerankResult Engine::rerank(const SubQueryResult& sub, std::size_t k) const {
  return rerank_top_k(rerank_items(sub), sub.retrieved.sub_query, *clients_.cross_encoder, k,
                      config_.rerank.beta, config_.effective_query_time());
}

nlohmann::ordered_json candidates_to_json(const std::vector<Candidate>& candidates) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    nlohmann::ordered_json j;
    j["chunk_id"] = c.chunk_id;
    j["paths"] = path_names(c.paths);
    j["best_rank"] = c.best_rank;
    j["best_path"] = path_name(c.best_path);
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json bundles_to_json(const std::vector<Bundle>& bundles) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : bundles) {
    nlohmann::ordered_json j;
    j["seed_chunk_id"] = b.seed_chunk_id;
    j["member_ids"] = b.member_ids;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json ranked_to_json(const RerankResult& result, const ChunkStore& store) {
  auto arr = nlohmann::ordered_json::array();
  int rank = 0;
  for (const auto& s : result.ranked) {
    const auto& seed = store.at(s.item.id);
    nlohmann::ordered_json j;
    j["rank"] = ++rank;
    j["id"] = s.item.id;
    j["final_score"] = s.final_score;
    j["raw_logit"] = s.raw_logit;
    j["time_bonus"] = s.time_bonus;
    j["member_ids"] = s.item.member_ids;
    j["document_id"] = seed.meta.document_id;
    j["title"] = seed.meta.title;
    j["page_start"] = seed.meta.page_start;
    j["page_end"] = seed.meta.page_end;
    j["publication_date"] = seed.meta.publication_date
                                ? nlohmann::ordered_json(seed.meta.publication_date->to_string())
                                : nlohmann::ordered_json(nullptr);
    j["text"] = s.item.text;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json query_result_to_json(const QueryResult& result, const ChunkStore& store) {
  nlohmann::ordered_json j;
  j["query"] = result.plan.original_query;
  j["sub_queries"] = result.plan.sub_queries;
  j["degraded"] = result.plan.degraded;
  auto subs = nlohmann::ordered_json::array();
  for (const auto& sub : result.sub_results) {
    auto s = retrieved_set_to_json(sub.retrieved);
    s["candidates"] = candidates_to_json(sub.candidates);
    s["bundles"] = bundles_to_json(sub.bundles);
    if (!sub.reranked.ranked.empty() || !sub.reranked.warnings.empty()) {
      s["ranked"] = ranked_to_json(sub.reranked, store);
      s["rerank_warnings"] = sub.reranked.warnings;
    }
    subs.push_back(std::move(s));
  }
  j["results"] = std::move(subs);
  j["retrieved_chunk_ids"] = result.retrieved_chunk_ids();
  j["warnings"] = result.warnings();
  return j;
}

}  // namespace finsage
