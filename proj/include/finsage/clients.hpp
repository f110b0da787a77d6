#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace finsage {

using Vector = std::vector<double>;

enum class GenerationRole { kCoref, kSummarize, kParaphrase, kHyde, kTextualize };

const char* role_name(GenerationRole role);
std::optional<GenerationRole> parse_role(std::string_view name);

// Structured generation request. `input` is the text the role operates on
// (draft, segment text, query, or img_path for textualization); `context`
// carries preceding drafts, conversation turns, or neighbouring blocks.
struct GenerationRequest {
  GenerationRole role = GenerationRole::kHyde;
  std::string input;
  std::vector<std::string> context;
  std::string label;  // block type for textualization ("table" / "image")
  int n = 1;
};

/// Flattens a request into the single prompt string carried on the wire.
std::string render_prompt(const GenerationRequest& request);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One unit-norm vector per text, all of dimension().
  virtual std::vector<Vector> embed_texts(const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::vector<std::string> generate_texts(const GenerationRequest& request) = 0;
};

class CrossEncoder {
 public:
  virtual ~CrossEncoder() = default;
  /// Raw logits, one per passage.
  virtual std::vector<double> cross_score(const std::string& query,
                                          const std::vector<std::string>& passages) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic stubs

class StubEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDimension = 64;

  std::vector<Vector> embed_texts(const std::vector<std::string>& texts) override;
  std::size_t dimension() const override { return kDimension; }

  /// Bucket index used for one character 3-gram; exposed for tests.
  static std::size_t bucket_of(std::string_view gram);
  /// Padded, lowercased 3-grams of `text` (the whole padded string when
  /// shorter than three bytes).
  static std::vector<std::string> grams_of(std::string_view text);
};

// Role-tagged deterministic behaviour:
//   coref      -> input unchanged
//   summarize  -> first ten whitespace tokens of input
//   paraphrase -> sub-queries, newline separated (split on '?' and " and ")
//   hyde       -> n copies of input
//   textualize -> "TABLE(<img_path>) ctx=<first 5 context tokens>"
class StubGenerator final : public TextGenerator {
 public:
  std::vector<std::string> generate_texts(const GenerationRequest& request) override;

  static std::vector<std::string> split_query(std::string_view query);
};

/// logit(clamp(jaccard(query tokens, passage tokens), eps, 1 - eps)).
class StubCrossEncoder final : public CrossEncoder {
 public:
  static constexpr double kEpsilon = 1e-6;

  std::vector<double> cross_score(const std::string& query,
                                  const std::vector<std::string>& passages) override;

  static double jaccard(std::string_view a, std::string_view b);
};

// ---------------------------------------------------------------------------
// HTTP clients

enum class ClientKind { kStub, kHttp };

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};
};

struct ClientConfig {
  ClientKind kind = ClientKind::kStub;
  std::string endpoint;
  std::chrono::milliseconds timeout{30000};
  int max_concurrency = 4;
  RetryPolicy retry;

  /// Throws Error(kConfig) when an invariant is violated.
  void validate(std::string_view role) const;
};

nlohmann::ordered_json to_json(const ClientConfig& config);
ClientConfig client_config_from_json(const nlohmann::json& j);

// POSTs JSON to one endpoint, with at most max_concurrency requests in
// flight, retrying transport failures and 5xx responses.
class HttpTransport {
 public:
  explicit HttpTransport(ClientConfig config);

  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  const ClientConfig& config() const { return config_; }

 private:
  ClientConfig config_;
  std::string base_;    // scheme://host:port
  std::string prefix_;  // optional path prefix
  std::counting_semaphore<1024> slots_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(ClientConfig config) : transport_(std::move(config)) {}

  std::vector<Vector> embed_texts(const std::vector<std::string>& texts) override;
  std::size_t dimension() const override { return dimension_.load(); }

 private:
  HttpTransport transport_;
  std::atomic<std::size_t> dimension_{0};
};

class HttpGenerator final : public TextGenerator {
 public:
  explicit HttpGenerator(ClientConfig config) : transport_(std::move(config)) {}

  std::vector<std::string> generate_texts(const GenerationRequest& request) override;

 private:
  HttpTransport transport_;
};

class HttpCrossEncoder final : public CrossEncoder {
 public:
  explicit HttpCrossEncoder(ClientConfig config) : transport_(std::move(config)) {}

  std::vector<double> cross_score(const std::string& query,
                                  const std::vector<std::string>& passages) override;

 private:
  HttpTransport transport_;
};

struct ModelClients {
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<TextGenerator> generator;
  std::shared_ptr<CrossEncoder> cross_encoder;

  static ModelClients stubs();
};

std::shared_ptr<Embedder> make_embedder(const ClientConfig& config);
std::shared_ptr<TextGenerator> make_generator(const ClientConfig& config);
std::shared_ptr<CrossEncoder> make_cross_encoder(const ClientConfig& config);

/// Scales v to unit L2 norm. Throws Error(kDomain) on a zero vector.
void normalize(Vector& v);
double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);

}  // namespace finsage
