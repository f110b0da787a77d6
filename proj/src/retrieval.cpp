#include "finsage/retrieval.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>

#include "finsage/errors.hpp"
#include "finsage/text.hpp"

namespace finsage {

QueryPlan paraphrase_query(const std::string& query, const std::vector<std::string>& history,
                           TextGenerator& paraphraser) {
  if (trim(query).empty()) throw Error(ErrorCode::kArgument, "query must be non-empty");
  QueryPlan plan;
  plan.original_query = query;
  plan.history_used = !history.empty();

  GenerationRequest request;
  request.role = GenerationRole::kParaphrase;
  request.input = query;
  request.context = history;
  try {
    auto texts = paraphraser.generate_texts(request);
    if (!texts.empty()) {
      std::size_t start = 0;
      const std::string& out = texts.front();
      while (start <= out.size()) {
        auto end = out.find('\n', start);
        if (end == std::string::npos) end = out.size();
        auto line = trim(std::string_view(out).substr(start, end - start));
        if (!line.empty()) plan.sub_queries.push_back(std::move(line));
        start = end + 1;
      }
    }
  } catch (const std::exception&) {
    plan.sub_queries.clear();
    plan.degraded = true;
  }
  if (plan.sub_queries.empty()) {
    plan.sub_queries = {query};
    plan.degraded = true;
  }
  return plan;
}

std::vector<SearchHit> RetrievedSet::path_hits(RetrievalPath path) const {
  std::vector<SearchHit> out;
  for (const auto& h : hits) {
    if (h.path == path) out.push_back(h);
  }
  return out;
}

std::vector<SearchHit> retrieve_hyde(const std::string& sub_query, std::size_t n_hypotheses,
                                     TextGenerator& generator, Embedder& embedder,
                                     const ChunkStore& store, std::size_t k) {
  if (n_hypotheses < 1) throw Error(ErrorCode::kArgument, "n_hypotheses must be >= 1");
  if (k < 1) throw Error(ErrorCode::kArgument, "k must be >= 1");
  GenerationRequest request;
  request.role = GenerationRole::kHyde;
  request.input = sub_query;
  request.n = static_cast<int>(n_hypotheses);
  std::vector<std::string> hypotheses;
  try {
    hypotheses = generator.generate_texts(request);
  } catch (const std::exception&) {
    hypotheses.clear();
  }
  std::erase_if(hypotheses, [](const std::string& h) { return trim(h).empty(); });
  if (hypotheses.empty()) hypotheses = {sub_query};
  if (hypotheses.size() > n_hypotheses) hypotheses.resize(n_hypotheses);

  auto vectors = embedder.embed_texts(hypotheses);
  std::unordered_map<std::string, double> best;
  for (auto& v : vectors) {
    normalize(v);
    for (const auto& hit : store.dense_search(v, k)) {
      auto [it, inserted] = best.try_emplace(hit.chunk_id, hit.score);
      if (!inserted) it->second = std::max(it->second, hit.score);
    }
  }
  std::vector<SearchHit> hits;
  hits.reserve(best.size());
  for (const auto& [id, score] : best) hits.push_back({id, score, RetrievalPath::kHyde, 0});
  sort_and_rank(hits, k);
  return hits;
}

RetrievedSet retrieve_paths(const std::string& sub_query, const ChunkStore& store,
                            const ModelClients& clients, const RetrievalConfig& config) {
  if (store.empty()) throw Error(ErrorCode::kEmptyStore, "store holds no chunks");
  RetrievedSet set;
  set.sub_query = sub_query;
  set.config = config;
  std::size_t enabled = 0;
  std::size_t failed = 0;

  auto run = [&](RetrievalPath path, std::size_t k, auto&& body) {
    if (k == 0) return;
    ++enabled;
    try {
      for (auto& hit : body(k)) {
        hit.path = path;
        set.hits.push_back(std::move(hit));
      }
    } catch (const std::exception& e) {
      ++failed;
      set.errors.push_back(std::string(path_name(path)) + ": " + e.what());
    }
  };

  std::optional<Vector> query_vec;
  auto embedded = [&]() -> const Vector& {
    if (!query_vec) {
      auto vecs = clients.embedder->embed_texts({sub_query});
      normalize(vecs.at(0));
      query_vec = std::move(vecs.at(0));
    }
    return *query_vec;
  };

  run(RetrievalPath::kDense, config.k_dense,
      [&](std::size_t k) { return store.dense_search(embedded(), k); });
  run(RetrievalPath::kBm25, config.k_bm25,
      [&](std::size_t k) { return store.bm25_search(tokenize(sub_query), k); });
  run(RetrievalPath::kMetadata, config.k_meta,
      [&](std::size_t k) { return store.metadata_search(embedded(), k); });
  run(RetrievalPath::kHyde, config.k_hyde, [&](std::size_t k) {
    return retrieve_hyde(sub_query, config.hyde_hypotheses, *clients.generator,
                         *clients.embedder, store, k);
  });

  if (enabled == 0) throw Error(ErrorCode::kConfig, "every retrieval path is disabled");
  if (failed == enabled) {
    std::string msg = "all retrieval paths failed";
    for (const auto& e : set.errors) msg += "; " + e;
    throw Error(ErrorCode::kClient, msg);
  }
  return set;
}

std::vector<std::string> path_names(std::uint8_t mask) {
  std::vector<std::string> out;
  for (auto p : kAllPaths) {
    if (mask & (1u << static_cast<int>(p))) out.emplace_back(path_name(p));
  }
  return out;
}

std::vector<Candidate> union_candidates(const std::vector<SearchHit>& hits) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Candidate> out;
  for (const auto& hit : hits) {
    auto [it, inserted] = index.try_emplace(hit.chunk_id, out.size());
    if (inserted) {
      out.push_back({hit.chunk_id, 0, hit.rank, hit.path});
    }
    Candidate& c = out[it->second];
    c.paths |= static_cast<std::uint8_t>(1u << static_cast<int>(hit.path));
    if (hit.rank < c.best_rank || (hit.rank == c.best_rank && hit.path < c.best_path)) {
      c.best_rank = hit.rank;
      c.best_path = hit.path;
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
    if (a.best_path != b.best_path) return a.best_path < b.best_path;
    return a.chunk_id < b.chunk_id;
  });
  return out;
}

std::vector<Bundle> expand_bundles(const std::vector<Candidate>& candidates,
                                   const ChunkStore& store, double threshold,
                                   std::size_t bundle_limit) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kArgument, "expansion threshold must lie in (0, 1]");
  }
  if (bundle_limit < 1) throw Error(ErrorCode::kArgument, "bundle_limit must be >= 1");
  std::vector<Bundle> bundles;
  bundles.reserve(candidates.size());
  for (const auto& cand : candidates) {
    const Chunk& seed = store.at(cand.chunk_id);
    std::deque<const Chunk*> members{&seed};
    bool prev_open = true;
    bool next_open = true;
    auto try_grow = [&](Direction dir, bool& open) {
      if (!open || members.size() >= bundle_limit) return;
      const Chunk* edge = dir == Direction::kPrev ? members.front() : members.back();
      const Chunk* nb = store.get_neighbors(edge->chunk_id, dir);
      if (!nb || dot(seed.dense, nb->dense) < threshold) {
        open = false;
        return;
      }
      if (dir == Direction::kPrev) {
        members.push_front(nb);
      } else {
        members.push_back(nb);
      }
    };
    while (members.size() < bundle_limit && (prev_open || next_open)) {
      try_grow(Direction::kPrev, prev_open);
      try_grow(Direction::kNext, next_open);
    }
    Bundle b;
    b.seed_chunk_id = seed.chunk_id;
    for (const Chunk* m : members) {
      if (!b.combined_text.empty()) b.combined_text += '\n';
      b.combined_text += m->text;
      b.member_ids.push_back(m->chunk_id);
    }
    bundles.push_back(std::move(b));
  }
  return bundles;
}

nlohmann::ordered_json hits_to_json(const std::vector<SearchHit>& hits) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& h : hits) {
    arr.push_back({{"rank", h.rank}, {"chunk_id", h.chunk_id}, {"score", h.score}});
  }
  return arr;
}

nlohmann::ordered_json retrieved_set_to_json(const RetrievedSet& set) {
  nlohmann::ordered_json j;
  j["sub_query"] = set.sub_query;
  nlohmann::ordered_json paths = nlohmann::ordered_json::object();
  for (auto p : kAllPaths) paths[path_name(p)] = hits_to_json(set.path_hits(p));
  j["paths"] = std::move(paths);
  j["errors"] = set.errors;
  return j;
}

}  // namespace finsage
