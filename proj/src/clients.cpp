#include "finsage/clients.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "finsage/errors.hpp"
#include "finsage/text.hpp"
#include "httplib.h"

namespace finsage {

const char* role_name(GenerationRole role) {
  switch (role) {
    case GenerationRole::kCoref: return "coref";
    case GenerationRole::kSummarize: return "summarize";
    case GenerationRole::kParaphrase: return "paraphrase";
    case GenerationRole::kHyde: return "hyde";
    case GenerationRole::kTextualize: return "textualize";
  }
  return "unknown";
}

std::optional<GenerationRole> parse_role(std::string_view name) {
  for (auto role : {GenerationRole::kCoref, GenerationRole::kSummarize,
                    GenerationRole::kParaphrase, GenerationRole::kHyde,
                    GenerationRole::kTextualize}) {
    if (name == role_name(role)) return role;
  }
  return std::nullopt;
}

std::string render_prompt(const GenerationRequest& request) {
  std::string out;
  auto numbered = [&](const char* heading) {
    out += heading;
    out += ":\n";
    if (request.context.empty()) out += "(none)\n";
    for (std::size_t i = 0; i < request.context.size(); ++i) {
      out += "[" + std::to_string(i + 1) + "] " + request.context[i] + "\n";
    }
    out += "\n";
  };
  switch (request.role) {
    case GenerationRole::kCoref:
      out += "Replace every pronoun in the passage with the entity it refers to. "
             "Use the preceding passages from the same section as reference. "
             "Return only the rewritten passage.\n\n";
      numbered("Preceding passages");
      out += "Passage:\n" + request.input;
      break;
    case GenerationRole::kSummarize:
      out += "Summarize the following section of a financial filing in one or two "
             "sentences.\n\nSection:\n" + request.input;
      break;
    case GenerationRole::kParaphrase:
      out += "Rewrite the question as self-contained sub-queries, one per line. "
             "Split compound questions, resolve pronouns, and fold in details from "
             "the conversation history.\n\n";
      numbered("History");
      out += "Question:\n" + request.input;
      break;
    case GenerationRole::kHyde:
      out += "Write a passage from a financial filing that answers the question.\n\n"
             "Question:\n" + request.input;
      break;
    case GenerationRole::kTextualize:
      out += "Describe the " + (request.label.empty() ? std::string("figure") : request.label) +
             " image at " + request.input +
             " as plain factual statements about its key data and trends.\n\n";
      out += "Preceding block:\n" + (request.context.size() > 0 ? request.context[0] : "") +
             "\n\nFollowing block:\n" + (request.context.size() > 1 ? request.context[1] : "");
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// vector helpers

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Vector& v) { return std::sqrt(dot(v, v)); }

void normalize(Vector& v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kDomain, "cannot normalize a zero or non-finite vector");
  }
  for (auto& x : v) x /= norm;
}

// ---------------------------------------------------------------------------
// stubs

std::vector<std::string> StubEmbedder::grams_of(std::string_view text) {
  std::string padded = " " + to_lower_ascii(text) + " ";
  std::vector<std::string> grams;
  if (padded.size() < 3) {
    grams.push_back(padded);
    return grams;
  }
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.push_back(padded.substr(i, 3));
  return grams;
}

std::size_t StubEmbedder::bucket_of(std::string_view gram) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : gram) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % kDimension);
}

std::vector<Vector> StubEmbedder::embed_texts(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Vector v(kDimension, 0.0);
    for (const auto& gram : grams_of(text)) v[bucket_of(gram)] += 1.0;
    normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> StubGenerator::split_query(std::string_view query) {
  std::vector<std::string> pieces;
  std::string current;
  int depth = 0;
  bool quoted = false;
  auto flush = [&] {
    auto piece = trim(current);
    current.clear();
    auto lowered = to_lower_ascii(piece);
    if (lowered.rfind("and ", 0) == 0) piece = trim(std::string_view(piece).substr(4));
    bool has_word = std::any_of(piece.begin(), piece.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
    });
    if (has_word) pieces.push_back(std::move(piece));
  };
  for (std::size_t i = 0; i < query.size(); ++i) {
    char c = query[i];
    if (c == '"') quoted = !quoted;
    if (!quoted && (c == '(' || c == '[')) ++depth;
    if (!quoted && (c == ')' || c == ']') && depth > 0) --depth;
    const bool top = depth == 0 && !quoted;
    if (top && c == ' ' && i + 5 <= query.size() &&
        to_lower_ascii(query.substr(i, 5)) == " and ") {
      flush();
      i += 4;
      continue;
    }
    current.push_back(c);
    if (top && c == '?') flush();
  }
  flush();
  if (pieces.empty()) pieces.push_back(trim(query));
  return pieces;
}

std::vector<std::string> StubGenerator::generate_texts(const GenerationRequest& request) {
  const int n = std::max(1, request.n);
  switch (request.role) {
    case GenerationRole::kCoref:
      return std::vector<std::string>(n, request.input);
    case GenerationRole::kSummarize: {
      auto tokens = split_whitespace(request.input);
      std::string prefix;
      for (std::size_t i = 0; i < tokens.size() && i < 10; ++i) {
        if (i) prefix += ' ';
        prefix += tokens[i];
      }
      return std::vector<std::string>(n, prefix);
    }
    case GenerationRole::kParaphrase: {
      std::string joined;
      for (const auto& piece : split_query(request.input)) {
        if (!joined.empty()) joined += '\n';
        joined += piece;
      }
      return std::vector<std::string>(n, joined);
    }
    case GenerationRole::kHyde:
      return std::vector<std::string>(n, request.input);
    case GenerationRole::kTextualize: {
      std::string ctx;
      for (const auto& c : request.context) {
        if (!ctx.empty()) ctx += ' ';
        ctx += c;
      }
      auto tokens = split_whitespace(ctx);
      std::string head;
      for (std::size_t i = 0; i < tokens.size() && i < 5; ++i) {
        if (i) head += ' ';
        head += tokens[i];
      }
      std::string tag = request.label == "image" ? "IMAGE" : "TABLE";
      return std::vector<std::string>(n, tag + "(" + request.input + ") ctx=" + head);
    }
  }
  return {};
}

double StubCrossEncoder::jaccard(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> StubCrossEncoder::cross_score(const std::string& query,
                                                  const std::vector<std::string>& passages) {
  std::vector<double> logits;
  logits.reserve(passages.size());
  for (const auto& passage : passages) {
    double p = std::clamp(jaccard(query, passage), kEpsilon, 1.0 - kEpsilon);
    logits.push_back(std::log(p / (1.0 - p)));
  }
  return logits;
}

// ---------------------------------------------------------------------------
// config

void ClientConfig::validate(std::string_view role) const {
  const std::string who(role);
  if (kind == ClientKind::kHttp && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, who + ": http client requires an endpoint");
  }
  if (kind == ClientKind::kHttp && endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
    throw Error(ErrorCode::kConfig, who + ": endpoint must start with http:// or https://");
  }
  if (max_concurrency < 1) {
    throw Error(ErrorCode::kConfig, who + ": max_concurrency must be >= 1");
  }
  if (max_concurrency > 1024) {
    throw Error(ErrorCode::kConfig, who + ": max_concurrency must be <= 1024");
  }
  if (retry.attempts < 1) {
    throw Error(ErrorCode::kConfig, who + ": retry.attempts must be >= 1");
  }
  if (timeout.count() <= 0 || retry.backoff.count() < 0) {
    throw Error(ErrorCode::kConfig, who + ": timeout must be positive and backoff non-negative");
  }
}

nlohmann::ordered_json to_json(const ClientConfig& config) {
  nlohmann::ordered_json j;
  j["kind"] = config.kind == ClientKind::kHttp ? "http" : "stub";
  j["endpoint"] = config.endpoint.empty() ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(config.endpoint);
  j["timeout_ms"] = config.timeout.count();
  j["max_concurrency"] = config.max_concurrency;
  j["retry"] = {{"attempts", config.retry.attempts},
                {"backoff_ms", config.retry.backoff.count()}};
  return j;
}

ClientConfig client_config_from_json(const nlohmann::json& j) {
  ClientConfig c;
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "client config must be an object");
  auto kind = j.value("kind", std::string("stub"));
  if (kind == "stub") {
    c.kind = ClientKind::kStub;
  } else if (kind == "http") {
    c.kind = ClientKind::kHttp;
  } else {
    throw Error(ErrorCode::kConfig, "unknown client kind: " + kind);
  }
  if (j.contains("endpoint") && j["endpoint"].is_string()) c.endpoint = j["endpoint"];
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  c.max_concurrency = j.value("max_concurrency", 4);
  if (j.contains("retry")) {
    c.retry.attempts = j["retry"].value("attempts", 3);
    c.retry.backoff = std::chrono::milliseconds(j["retry"].value("backoff_ms", 200));
  }
  return c;
}

// ---------------------------------------------------------------------------
// HTTP

HttpTransport::HttpTransport(ClientConfig config)
    : config_(std::move(config)), slots_(config_.max_concurrency) {
  config_.validate("http client");
  const auto scheme = config_.endpoint.find("://");
  const auto path_start =
      config_.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = config_.endpoint;
  } else {
    base_ = config_.endpoint.substr(0, path_start);
    prefix_ = config_.endpoint.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
}

nlohmann::json HttpTransport::post(const std::string& path, const nlohmann::json& body) {
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry.backoff * attempt);
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{slots_};
      httplib::Client cli(base_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
          config_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      res = cli.Post(prefix_ + path, payload, "application/json");
    }
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw ClientError(base_ + prefix_ + path + ": HTTP " + std::to_string(res->status), false);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ClientError(base_ + prefix_ + path + ": invalid JSON response: " + e.what(), false);
    }
  }
  throw ClientError(base_ + prefix_ + path + ": " + last_error, true);
}

std::vector<Vector> HttpEmbedder::embed_texts(const std::vector<std::string>& texts) {
  auto res = transport_.post("/embed", {{"texts", texts}});
  if (!res.is_object() || !res.contains("vectors") || !res["vectors"].is_array() ||
      res["vectors"].size() != texts.size()) {
    throw ClientError("/embed: response does not match schema", false);
  }
  std::vector<Vector> out;
  for (const auto& row : res["vectors"]) {
    if (!row.is_array() || row.empty()) throw ClientError("/embed: malformed vector", false);
    Vector v;
    for (const auto& x : row) {
      if (!x.is_number()) throw ClientError("/embed: non-numeric component", false);
      v.push_back(x.get<double>());
    }
    std::size_t expected = 0;
    dimension_.compare_exchange_strong(expected, v.size());
    if (v.size() != dimension_.load()) {
      throw ClientError("/embed: expected dimension " + std::to_string(dimension_.load()) +
                            ", got " + std::to_string(v.size()),
                        false);
    }
    try {
      normalize(v);
    } catch (const Error&) {
      throw ClientError("/embed: zero vector returned", false);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> HttpGenerator::generate_texts(const GenerationRequest& request) {
  auto res = transport_.post("/generate", {{"role", role_name(request.role)},
                                           {"prompt", render_prompt(request)},
                                           {"n", request.n}});
  if (!res.is_object() || !res.contains("texts") || !res["texts"].is_array()) {
    throw ClientError("/generate: response does not match schema", false);
  }
  std::vector<std::string> out;
  for (const auto& t : res["texts"]) {
    if (!t.is_string()) throw ClientError("/generate: non-string text", false);
    out.push_back(t.get<std::string>());
  }
  if (out.empty()) throw ClientError("/generate: empty response", false);
  return out;
}

std::vector<double> HttpCrossEncoder::cross_score(const std::string& query,
                                                  const std::vector<std::string>& passages) {
  auto res = transport_.post("/score", {{"query", query}, {"passages", passages}});
  if (!res.is_object() || !res.contains("logits") || !res["logits"].is_array() ||
      res["logits"].size() != passages.size()) {
    throw ClientError("/score: response does not match schema", false);
  }
  std::vector<double> out;
  for (const auto& x : res["logits"]) {
    if (!x.is_number()) throw ClientError("/score: non-numeric logit", false);
    out.push_back(x.get<double>());
  }
  return out;
}

ModelClients ModelClients::stubs() {
  return {std::make_shared<StubEmbedder>(), std::make_shared<StubGenerator>(),
          std::make_shared<StubCrossEncoder>()};
}

std::shared_ptr<Embedder> make_embedder(const ClientConfig& config) {
  config.validate("embedder");
  if (config.kind == ClientKind::kStub) return std::make_shared<StubEmbedder>();
  return std::make_shared<HttpEmbedder>(config);
}

std::shared_ptr<TextGenerator> make_generator(const ClientConfig& config) {
  config.validate("generator");
  if (config.kind == ClientKind::kStub) return std::make_shared<StubGenerator>();
  return std::make_shared<HttpGenerator>(config);
}

std::shared_ptr<CrossEncoder> make_cross_encoder(const ClientConfig& config) {
  config.validate("cross_encoder");
  if (config.kind == ClientKind::kStub) return std::make_shared<StubCrossEncoder>();
  return std::make_shared<HttpCrossEncoder>(config);
}

}  // namespace finsage
