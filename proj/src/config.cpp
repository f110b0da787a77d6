#include "finsage/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "finsage/errors.hpp"

namespace finsage {

namespace {

nlohmann::ordered_json date_or_null(const std::optional<Date>& d) {
  return d ? nlohmann::ordered_json(d->to_string()) : nlohmann::ordered_json(nullptr);
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::kConfig, "unknown config key: " + where + "." + key);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kConfig, "config key " + where + "." + key + " has the wrong type");
  }
}

void read_size(const nlohmann::json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::kConfig, "config key " + where + "." + key +
                                        " must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

ClientConfig read_client(const nlohmann::json& j, const std::string& where) {
  reject_unknown(j, {"kind", "endpoint", "timeout_ms", "max_concurrency", "retry"}, where);
  if (j.contains("retry")) reject_unknown(j["retry"], {"attempts", "backoff_ms"}, where + ".retry");
  try {
    return client_config_from_json(j);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kConfig, where + " has a value of the wrong type");
  }
}

void collect_leaves(const nlohmann::ordered_json& j, const std::string& prefix,
                    std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      collect_leaves(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out.push_back(prefix);
  }
}

void set_dotted(nlohmann::ordered_json& j, const std::string& dotted, const std::string& raw) {
  nlohmann::ordered_json* node = &j;
  std::size_t start = 0;
  while (true) {
    auto dot_pos = dotted.find('.', start);
    const auto key = dotted.substr(start, dot_pos == std::string::npos ? std::string::npos : dot_pos - start);
    if (dot_pos == std::string::npos) {
      nlohmann::ordered_json value;
      try {
        value = nlohmann::ordered_json::parse(raw);
      } catch (const nlohmann::json::parse_error&) {
        value = raw;
      }
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) {
      throw Error(ErrorCode::kConfig, "unknown config key: " + dotted);
    }
    node = &(*node)[key];
    start = dot_pos + 1;
  }
}

}  // namespace

void EngineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  if (store_path.empty()) fail("store_path must be set");
  clients.embedder.validate("clients.embedder");
  clients.generator.validate("clients.generator");
  clients.cross_encoder.validate("clients.cross_encoder");
  if (!(thresholds.tau_dedup > 0.0 && thresholds.tau_dedup <= 1.0)) fail("thresholds.tau_dedup must lie in (0, 1]");
  if (!(thresholds.tau_exp > 0.0 && thresholds.tau_exp <= 1.0)) fail("thresholds.tau_exp must lie in (0, 1]");
  if (thresholds.bundle_limit < 1) fail("thresholds.bundle_limit must be >= 1");
  if (thresholds.segment_budget < 1) fail("thresholds.segment_budget must be >= 1");
  if (retrieval.k_dense + retrieval.k_bm25 + retrieval.k_meta + retrieval.k_hyde == 0) {
    fail("at least one retrieval path must have K > 0");
  }
  if (retrieval.hyde_hypotheses < 1) fail("retrieval.hyde_hypotheses must be >= 1");
  if (rerank.k < 1) fail("rerank.k must be >= 1");
  if (!std::isfinite(rerank.beta)) fail("rerank.beta must be finite");
  if (!(bm25.k1 >= 0.0) || !(bm25.b >= 0.0 && bm25.b <= 1.0)) fail("bm25 parameters out of range");
  if (eval_k.empty()) fail("eval_k must list at least one K");
  for (auto k : eval_k) {
    if (k < 1) fail("eval_k entries must be >= 1");
  }
  if (!(balance_ratio > 0.0)) fail("balance_ratio must be > 0");
}

nlohmann::ordered_json config_to_json(const EngineConfig& c) {
  nlohmann::ordered_json j;
  j["store_path"] = c.store_path;
  j["clients"] = {{"embedder", to_json(c.clients.embedder)},
                  {"generator", to_json(c.clients.generator)},
                  {"cross_encoder", to_json(c.clients.cross_encoder)}};
  j["thresholds"] = {{"tau_dedup", c.thresholds.tau_dedup},
                     {"tau_exp", c.thresholds.tau_exp},
                     {"bundle_limit", c.thresholds.bundle_limit},
                     {"coref_k", c.thresholds.coref_k},
                     {"segment_budget", c.thresholds.segment_budget},
                     {"segment_unit", length_unit_name(c.thresholds.segment_unit)}};
  j["retrieval"] = {{"k_dense", c.retrieval.k_dense},
                    {"k_bm25", c.retrieval.k_bm25},
                    {"k_meta", c.retrieval.k_meta},
                    {"k_hyde", c.retrieval.k_hyde},
                    {"hyde_hypotheses", c.retrieval.hyde_hypotheses}};
  j["rerank"] = {{"k", c.rerank.k},
                 {"beta", c.rerank.beta},
                 {"query_time", date_or_null(c.rerank.query_time)},
                 {"rerank_bundles", c.rerank.rerank_bundles}};
  j["bm25"] = {{"k1", c.bm25.k1}, {"b", c.bm25.b}};
  j["eval_k"] = c.eval_k;
  j["balance_ratio"] = c.balance_ratio;
  j["seed"] = c.seed;
  return j;
}

EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  reject_unknown(j, {"store_path", "clients", "thresholds", "retrieval", "rerank", "bm25", "eval_k",
                     "balance_ratio", "seed"},
                 "config");
  read(j, "store_path", c.store_path, "config");
  if (j.contains("clients")) {
    const auto& cl = j["clients"];
    reject_unknown(cl, {"embedder", "generator", "cross_encoder"}, "clients");
    if (cl.contains("embedder")) c.clients.embedder = read_client(cl["embedder"], "clients.embedder");
    if (cl.contains("generator")) c.clients.generator = read_client(cl["generator"], "clients.generator");
    if (cl.contains("cross_encoder")) {
      c.clients.cross_encoder = read_client(cl["cross_encoder"], "clients.cross_encoder");
    }
  }
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    reject_unknown(t, {"tau_dedup", "tau_exp", "bundle_limit", "coref_k", "segment_budget", "segment_unit"},
                   "thresholds");
    read(t, "tau_dedup", c.thresholds.tau_dedup, "thresholds");
    read(t, "tau_exp", c.thresholds.tau_exp, "thresholds");
    read_size(t, "bundle_limit", c.thresholds.bundle_limit, "thresholds");
    read_size(t, "coref_k", c.thresholds.coref_k, "thresholds");
    read_size(t, "segment_budget", c.thresholds.segment_budget, "thresholds");
    if (t.contains("segment_unit")) {
      auto unit = t["segment_unit"].is_string() ? parse_length_unit(t["segment_unit"].get<std::string>())
                                                : std::nullopt;
      if (!unit) throw Error(ErrorCode::kConfig, "thresholds.segment_unit must be 'characters' or 'tokens'");
      c.thresholds.segment_unit = *unit;
    }
  }
  if (j.contains("retrieval")) {
    const auto& r = j["retrieval"];
    reject_unknown(r, {"k_dense", "k_bm25", "k_meta", "k_hyde", "hyde_hypotheses"}, "retrieval");
    read_size(r, "k_dense", c.retrieval.k_dense, "retrieval");
    read_size(r, "k_bm25", c.retrieval.k_bm25, "retrieval");
    read_size(r, "k_meta", c.retrieval.k_meta, "retrieval");
    read_size(r, "k_hyde", c.retrieval.k_hyde, "retrieval");
    read_size(r, "hyde_hypotheses", c.retrieval.hyde_hypotheses, "retrieval");
  }
  if (j.contains("rerank")) {
    const auto& r = j["rerank"];
    reject_unknown(r, {"k", "beta", "query_time", "rerank_bundles"}, "rerank");
    read_size(r, "k", c.rerank.k, "rerank");
    read(r, "beta", c.rerank.beta, "rerank");
    read(r, "rerank_bundles", c.rerank.rerank_bundles, "rerank");
    if (r.contains("query_time") && !r["query_time"].is_null()) {
      auto d = r["query_time"].is_string() ? Date::parse(r["query_time"].get<std::string>()) : std::nullopt;
      if (!d) throw Error(ErrorCode::kConfig, "rerank.query_time must be an ISO-8601 date or null");
      c.rerank.query_time = *d;
    }
  }
  if (j.contains("bm25")) {
    reject_unknown(j["bm25"], {"k1", "b"}, "bm25");
    read(j["bm25"], "k1", c.bm25.k1, "bm25");
    read(j["bm25"], "b", c.bm25.b, "bm25");
  }
  if (j.contains("eval_k")) {
    if (!j["eval_k"].is_array()) throw Error(ErrorCode::kConfig, "eval_k must be an array");
    c.eval_k.clear();
    for (const auto& k : j["eval_k"]) {
      if (!k.is_number_integer() || k.get<long long>() < 1) {
        throw Error(ErrorCode::kConfig, "eval_k entries must be positive integers");
      }
      c.eval_k.push_back(k.get<std::size_t>());
    }
  }
  read(j, "balance_ratio", c.balance_ratio, "config");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw Error(ErrorCode::kConfig, "seed must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

std::string env_name_for(const std::string& dotted_key) {
  std::string out = "FINSAGE_";
  for (char c : dotted_key) {
    if (c == '.') {
      out += '_';
    } else {
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

EngineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                         const std::vector<std::string>& overrides) {
  nlohmann::ordered_json merged = config_to_json(EngineConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::kConfig, "cannot read config file: " + file->string());
    nlohmann::json from_file;
    try {
      from_file = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kConfig, "config file " + file->string() + " is not valid JSON: " + e.what());
    }
    // Validate the file on its own so unknown keys are reported against it.
    merged = config_to_json(config_from_json(from_file));
  }
  std::vector<std::string> leaves;
  collect_leaves(merged, "", leaves);
  if (env) {
    for (const auto& leaf : leaves) {
      if (auto value = env(env_name_for(leaf))) set_dotted(merged, leaf, *value);
    }
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kConfig, "override must look like key=value: " + ov);
    }
    set_dotted(merged, ov.substr(0, eq), ov.substr(eq + 1));
  }
  EngineConfig config = config_from_json(merged);
  config.validate();
  return config;
}

ModelClients make_clients(const ClientsConfig& config) {
  return {make_embedder(config.embedder), make_generator(config.generator),
          make_cross_encoder(config.cross_encoder)};
}

}  // namespace finsage
