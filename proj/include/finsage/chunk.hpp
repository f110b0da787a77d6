#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finsage/clients.hpp"
#include "finsage/text.hpp"
#include "json.hpp"

namespace finsage {

struct ChunkMetadata {
  std::string title;
  std::string title_summary;
  std::string document_id;
  int page_start = 0;
  int page_end = 0;
  std::optional<Date> publication_date;
  std::string segment_id;
};

// Refined text, enriched metadata, dense embedding, sparse term map, and
// metadata embedding. chunk_id is the hex SHA-256 of `text`.
struct Chunk {
  std::string chunk_id;
  std::string text;
  ChunkMetadata meta;
  Vector dense;
  std::map<std::string, int> sparse;
  Vector meta_dense;
  std::optional<std::string> prev_id;
  std::optional<std::string> next_id;
};

nlohmann::ordered_json chunk_to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);

void write_chunks_jsonl(std::ostream& out, const std::vector<Chunk>& chunks);

/// Reads one chunk per non-empty line; errors name the 1-based line.
std::vector<Chunk> read_chunks_jsonl(std::istream& in);

}  // namespace finsage
