#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "finsage/config.hpp"
#include "finsage/engine.hpp"
#include "finsage/ingest.hpp"
#include "finsage/queries.hpp"
#include "helpers.hpp"

namespace finsage::testing {

struct ToyFiling {
  const char* document_id;
  const char* publication_date;
};

// Input order matches a sorted directory listing.
inline const std::vector<ToyFiling>& toy_filings() {
  static const std::vector<ToyFiling> filings{{"borealis_2024_q2", "2024-08-10"},
                                              {"northwind_2023_10k", "2023-03-01"},
                                              {"northwind_2024_10k", "2024-03-01"}};
  return filings;
}

inline std::filesystem::path toy_dir() { return FINSAGE_TOY_DIR; }

inline std::filesystem::path toy_filing_path(const ToyFiling& f) {
  return toy_dir() / "filings" / (std::string(f.document_id) + "_content_list.json");
}

inline EngineConfig toy_config() {
  return load_config(toy_dir() / "config.json", nullptr);
}

inline std::shared_ptr<const ChunkStore> toy_store(const EngineConfig& config = toy_config()) {
  std::vector<SourceDocument> docs;
  for (const auto& f : toy_filings()) {
    SourceDocument doc;
    doc.document_id = f.document_id;
    doc.publication_date = Date::parse(f.publication_date);
    doc.blocks = parse_content_list(slurp(toy_filing_path(f)));
    docs.push_back(std::move(doc));
  }
  IngestOptions options;
  options.tau_dedup = config.thresholds.tau_dedup;
  options.coref_k = config.thresholds.coref_k;
  options.segmentation = {config.thresholds.segment_budget, config.thresholds.segment_unit};
  auto result = ingest_documents(docs, options, make_clients(config.clients));
  auto store = std::make_shared<ChunkStore>(config.bm25);
  store->upsert_chunks(result.chunks);
  return store;
}

inline std::vector<EvalQuery> toy_queries() {
  std::ifstream in(toy_dir() / "queries.jsonl");
  return read_eval_queries(in);
}

}  // namespace finsage::testing
