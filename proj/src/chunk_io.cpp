#include <string>

#include "finsage/chunk.hpp"
#include "finsage/errors.hpp"

namespace finsage {

namespace {

nlohmann::ordered_json optional_string(const std::optional<std::string>& s) {
  return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
}

std::optional<std::string> read_optional_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

Vector read_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw Error(ErrorCode::kFormat, std::string("chunk field '") + key + "' must be an array");
  }
  return j[key].get<Vector>();
}

}  // namespace

nlohmann::ordered_json chunk_to_json(const Chunk& chunk) {
  nlohmann::ordered_json j;
  j["chunk_id"] = chunk.chunk_id;
  j["text"] = chunk.text;
  j["title"] = chunk.meta.title;
  j["title_summary"] = chunk.meta.title_summary;
  j["document_id"] = chunk.meta.document_id;
  j["page_start"] = chunk.meta.page_start;
  j["page_end"] = chunk.meta.page_end;
  j["publication_date"] = chunk.meta.publication_date
                              ? nlohmann::ordered_json(chunk.meta.publication_date->to_string())
                              : nlohmann::ordered_json(nullptr);
  j["segment_id"] = chunk.meta.segment_id;
  j["prev_id"] = optional_string(chunk.prev_id);
  j["next_id"] = optional_string(chunk.next_id);
  j["dense"] = chunk.dense;
  nlohmann::ordered_json sparse = nlohmann::ordered_json::object();
  for (const auto& [term, weight] : chunk.sparse) sparse[term] = weight;
  j["sparse"] = std::move(sparse);
  j["meta_dense"] = chunk.meta_dense;
  return j;
}

Chunk chunk_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kFormat, "chunk record must be a JSON object");
  try {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.meta.title = j.at("title").get<std::string>();
    c.meta.title_summary = j.at("title_summary").get<std::string>();
    c.meta.document_id = j.at("document_id").get<std::string>();
    c.meta.page_start = j.at("page_start").get<int>();
    c.meta.page_end = j.at("page_end").get<int>();
    if (j.contains("publication_date") && !j["publication_date"].is_null()) {
      auto date = Date::parse(j["publication_date"].get<std::string>());
      if (!date) throw Error(ErrorCode::kFormat, "publication_date is not an ISO-8601 date");
      c.meta.publication_date = *date;
    }
    c.meta.segment_id = j.at("segment_id").get<std::string>();
    c.prev_id = read_optional_string(j, "prev_id");
    c.next_id = read_optional_string(j, "next_id");
    c.dense = read_vector(j, "dense");
    c.meta_dense = read_vector(j, "meta_dense");
    for (const auto& [term, weight] : j.at("sparse").items()) c.sparse[term] = weight.get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed chunk record: ") + e.what());
  }
}

void write_chunks_jsonl(std::ostream& out, const std::vector<Chunk>& chunks) {
  for (const auto& chunk : chunks) out << chunk_to_json(chunk).dump() << '\n';
}

std::vector<Chunk> read_chunks_jsonl(std::istream& in) {
  std::vector<Chunk> chunks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      chunks.push_back(chunk_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kFormat,
                  "line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chunks;
}

}  // namespace finsage
