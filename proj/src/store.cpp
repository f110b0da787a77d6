#include "finsage/store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "finsage/errors.hpp"
#include "finsage/text.hpp"

namespace finsage {

const char* path_name(RetrievalPath path) {
  switch (path) {
    case RetrievalPath::kDense: return "dense";
    case RetrievalPath::kBm25: return "bm25";
    case RetrievalPath::kMetadata: return "metadata";
    case RetrievalPath::kHyde: return "hyde";
  }
  return "dense";
}

std::optional<RetrievalPath> parse_path(std::string_view name) {
  for (auto p : kAllPaths) {
    if (name == path_name(p)) return p;
  }
  return std::nullopt;
}

nlohmann::ordered_json manifest_to_json(const StoreManifest& manifest) {
  nlohmann::ordered_json j;
  j["format"] = "finsage-store";
  j["format_version"] = manifest.format_version;
  j["chunk_count"] = manifest.chunk_count;
  j["embedding_dim"] = manifest.embedding_dim;
  j["bm25_params"] = {{"k1", manifest.bm25.k1}, {"b", manifest.bm25.b}};
  j["bm25_idf"] = "ln((N - n + 0.5) / (n + 0.5) + 1)";
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const auto& d : manifest.documents) {
    docs.push_back({{"document_id", d.document_id},
                    {"publication_date", d.publication_date
                                             ? nlohmann::ordered_json(d.publication_date->to_string())
                                             : nlohmann::ordered_json(nullptr)}});
  }
  j["documents"] = std::move(docs);
  return j;
}

void sort_and_rank(std::vector<SearchHit>& hits, std::size_t k) {
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  });
  if (hits.size() > k) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i + 1);
}

ChunkStore::ChunkStore(Bm25Params params) : params_(params) {}

namespace {

bool newer(const std::optional<Date>& candidate, const std::optional<Date>& existing) {
  if (!candidate) return false;
  if (!existing) return true;
  return *candidate > *existing;
}

void check_unit_query(const Vector& query, std::size_t dim) {
  if (dim != 0 && query.size() != dim) throw DimensionError(dim, query.size());
  const double norm = l2_norm(query);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw Error(ErrorCode::kArgument,
                "query vector must be unit-norm (got norm " + std::to_string(norm) + ")");
  }
}

}  // namespace

UpsertReport ChunkStore::upsert_chunks(const std::vector<Chunk>& chunks) {
  std::size_t dim = dim_;
  for (const auto& c : chunks) {
    for (const Vector* v : {&c.dense, &c.meta_dense}) {
      if (dim == 0) dim = v->size();
      if (v->size() != dim) throw DimensionError(dim, v->size());
    }
  }
  UpsertReport report;
  for (const auto& c : chunks) {
    auto it = by_id_.find(c.chunk_id);
    if (it == by_id_.end()) {
      by_id_.emplace(c.chunk_id, chunks_.size());
      chunks_.push_back(c);
      ++report.inserted;
    } else if (newer(c.meta.publication_date, chunks_[it->second].meta.publication_date)) {
      chunks_[it->second] = c;
      ++report.replaced;
    } else {
      ++report.skipped;
    }
  }
  dim_ = dim;
  rebuild();
  return report;
}

void ChunkStore::rebuild() {
  postings_.clear();
  segments_.clear();
  segment_order_.clear();
  doc_len_.assign(chunks_.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    const auto& c = chunks_[i];
    int len = 0;
    for (const auto& [term, tf] : c.sparse) {
      postings_[term].push_back({i, tf});
      len += tf;
    }
    doc_len_[i] = len;
    total += len;
    auto [seg, inserted] = segments_.try_emplace(c.meta.segment_id);
    if (inserted) segment_order_.push_back(c.meta.segment_id);
    seg->second.push_back(i);
  }
  avg_len_ = chunks_.empty() ? 0.0 : total / static_cast<double>(chunks_.size());
}

std::vector<SearchHit> ChunkStore::dense_search(const Vector& query, std::size_t k) const {
  if (k < 1) throw Error(ErrorCode::kArgument, "k must be >= 1");
  check_unit_query(query, dim_);
  std::vector<SearchHit> hits;
  hits.reserve(chunks_.size());
  for (const auto& c : chunks_) hits.push_back({c.chunk_id, dot(query, c.dense), RetrievalPath::kDense, 0});
  sort_and_rank(hits, k);
  return hits;
}

double ChunkStore::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double n = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double total = static_cast<double>(chunks_.size());
  return std::log((total - n + 0.5) / (n + 0.5) + 1.0);
}

std::vector<SearchHit> ChunkStore::bm25_search(const std::vector<std::string>& query_terms,
                                               std::size_t k) const {
  if (k < 1) throw Error(ErrorCode::kArgument, "k must be >= 1");
  std::vector<double> scores(chunks_.size(), 0.0);
  std::vector<bool> matched(chunks_.size(), false);
  for (const auto& term : query_terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_len_[p.doc] / avg_len_);
      scores[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
      matched[p.doc] = true;
    }
  }
  std::vector<SearchHit> hits;
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (matched[i]) hits.push_back({chunks_[i].chunk_id, scores[i], RetrievalPath::kBm25, 0});
  }
  sort_and_rank(hits, k);
  return hits;
}

std::vector<SearchHit> ChunkStore::metadata_search(const Vector& query, std::size_t k_meta) const {
  if (k_meta < 1) throw Error(ErrorCode::kArgument, "k_meta must be >= 1");
  check_unit_query(query, dim_);
  struct Ranked {
    const std::string* segment_id;
    double score;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(segment_order_.size());
  for (const auto& sid : segment_order_) {
    const auto& members = segments_.at(sid);
    ranked.push_back({&sid, dot(query, chunks_[members.front()].meta_dense)});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.segment_id < *b.segment_id;
  });
  if (ranked.size() > k_meta) ranked.resize(k_meta);
  std::vector<SearchHit> hits;
  for (const auto& r : ranked) {
    for (std::size_t idx : segments_.at(*r.segment_id)) {
      hits.push_back({chunks_[idx].chunk_id, r.score, RetrievalPath::kMetadata,
                      static_cast<int>(hits.size() + 1)});
    }
  }
  return hits;
}

const Chunk* ChunkStore::find(const std::string& chunk_id) const {
  auto it = by_id_.find(chunk_id);
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const Chunk& ChunkStore::at(const std::string& chunk_id) const {
  const Chunk* c = find(chunk_id);
  if (!c) throw Error(ErrorCode::kNotFound, "unknown chunk_id: " + chunk_id);
  return *c;
}

const Chunk* ChunkStore::get_neighbors(const std::string& chunk_id, Direction direction) const {
  const Chunk& c = at(chunk_id);
  const auto& link = direction == Direction::kPrev ? c.prev_id : c.next_id;
  return link ? find(*link) : nullptr;
}

std::vector<const Chunk*> ChunkStore::segment_chunks(const std::string& segment_id) const {
  std::vector<const Chunk*> out;
  auto it = segments_.find(segment_id);
  if (it == segments_.end()) return out;
  for (std::size_t idx : it->second) out.push_back(&chunks_[idx]);
  return out;
}

StoreManifest ChunkStore::manifest() const {
  StoreManifest m;
  m.chunk_count = chunks_.size();
  m.embedding_dim = dim_;
  m.bm25 = params_;
  std::map<std::string, std::optional<Date>> docs;
  for (const auto& c : chunks_) {
    auto [it, inserted] = docs.try_emplace(c.meta.document_id, c.meta.publication_date);
    if (!inserted && newer(c.meta.publication_date, it->second)) it->second = c.meta.publication_date;
  }
  for (const auto& [id, date] : docs) m.documents.push_back({id, date});
  return m;
}

void ChunkStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open store file for writing: " + path.string());
  out << manifest_to_json(manifest()).dump() << '\n';
  write_chunks_jsonl(out, chunks_);
  // Postings are derivable from the chunk lines; written for external tools.
  nlohmann::ordered_json postings = nlohmann::ordered_json::object();
  std::map<std::string, const std::vector<Posting>*> sorted;
  for (const auto& [term, list] : postings_) sorted.emplace(term, &list);
  for (const auto& [term, list] : sorted) {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& p : *list) entries.push_back({p.doc, p.tf});
    postings[term] = std::move(entries);
  }
  out << nlohmann::ordered_json{{"postings", std::move(postings)}}.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing store file: " + path.string());
}

ChunkStore ChunkStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open store file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw Error(ErrorCode::kFormat, path.string() + ": empty store file");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": invalid manifest: " + e.what());
  }
  if (!header.is_object() || header.value("format", std::string()) != "finsage-store") {
    throw Error(ErrorCode::kFormat, path.string() + ": not a finsage store file");
  }
  const int version = header.value("format_version", -1);
  if (version != StoreManifest::kFormatVersion) {
    throw Error(ErrorCode::kFormat, path.string() + ": unsupported format_version " +
                                        std::to_string(version) + " (expected " +
                                        std::to_string(StoreManifest::kFormatVersion) + ")");
  }
  Bm25Params params;
  if (header.contains("bm25_params")) {
    params.k1 = header["bm25_params"].value("k1", params.k1);
    params.b = header["bm25_params"].value("b", params.b);
  }
  std::vector<Chunk> chunks;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kFormat,
                  path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (j.contains("postings")) break;
    try {
      chunks.push_back(chunk_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto expected = header.value("chunk_count", std::size_t{0});
  if (expected != chunks.size()) {
    throw Error(ErrorCode::kFormat, path.string() + ": manifest lists " + std::to_string(expected) +
                                        " chunks, file holds " + std::to_string(chunks.size()));
  }
  ChunkStore store(params);
  store.upsert_chunks(chunks);
  return store;
}

}  // namespace finsage
