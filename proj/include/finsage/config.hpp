#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finsage/clients.hpp"
#include "finsage/retrieval.hpp"
#include "finsage/store.hpp"
#include "finsage/text.hpp"
#include "json.hpp"

namespace finsage {

struct Thresholds {
  double tau_dedup = 0.7;
  double tau_exp = 0.85;
  std::size_t bundle_limit = 5;
  std::size_t coref_k = 4;
  std::size_t segment_budget = 200;
  LengthUnit segment_unit = LengthUnit::kCharacters;
};

struct RerankSettings {
  std::size_t k = 5;
  double beta = 0.1;
  std::optional<Date> query_time;  // today when unset
  bool rerank_bundles = true;      // false: re-rank raw chunks
};

struct ClientsConfig {
  ClientConfig embedder;
  ClientConfig generator;
  ClientConfig cross_encoder;
};

struct EngineConfig {
  std::string store_path = "finsage_store.jsonl";
  ClientsConfig clients;
  Thresholds thresholds;
  RetrievalConfig retrieval;
  RerankSettings rerank;
  Bm25Params bm25;
  std::vector<std::size_t> eval_k = {5, 10, 15};
  double balance_ratio = 4.0;
  std::uint64_t seed = 0;

  /// Throws Error(kConfig) naming the first out-of-range value.
  void validate() const;
  Date effective_query_time() const { return rerank.query_time.value_or(Date::today()); }
};

nlohmann::ordered_json config_to_json(const EngineConfig& config);

/// Strict: unknown keys are rejected. Missing keys keep their defaults.
EngineConfig config_from_json(const nlohmann::json& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
EnvLookup process_env();

/// Layered configuration: defaults, then the file (if given), then FINSAGE_*
/// environment variables, then `overrides` ("dotted.key=value"). Values are
/// parsed as JSON when possible and as plain strings otherwise.
EngineConfig load_config(const std::optional<std::filesystem::path>& file,
                         const EnvLookup& env, const std::vector<std::string>& overrides = {});

/// FINSAGE_<PATH> variable name for a dotted key, e.g. thresholds.tau_exp ->
/// FINSAGE_THRESHOLDS_TAU_EXP.
std::string env_name_for(const std::string& dotted_key);

ModelClients make_clients(const ClientsConfig& config);

}  // namespace finsage
