#pragma once

#include <unistd.h>

#include <atomic>
#include <functional>
#include <map>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "finsage/chunk.hpp"
#include "finsage/clients.hpp"
#include "finsage/errors.hpp"
#include "finsage/text.hpp"

namespace finsage::testing {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("finsage_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline Vector unit(std::vector<double> v) {
  normalize(v);
  return v;
}

// Chunk with hand-set vectors; the id is the text hash like real chunks.
inline Chunk make_chunk(const std::string& text, const std::string& doc, const std::string& segment,
                        Vector dense, std::optional<Date> date = std::nullopt,
                        std::optional<Vector> meta = std::nullopt) {
  Chunk c;
  c.text = text;
  c.chunk_id = sha256_hex(text);
  c.meta.title = segment;
  c.meta.title_summary = segment;
  c.meta.document_id = doc;
  c.meta.segment_id = segment;
  c.meta.publication_date = date;
  c.dense = std::move(dense);
  c.meta_dense = meta ? *meta : c.dense;
  c.sparse = term_frequencies(text);
  return c;
}

/// Links consecutive chunks as one document chain.
inline void link_chain(std::vector<Chunk>& chunks) {
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i > 0) chunks[i].prev_id = chunks[i - 1].chunk_id;
    if (i + 1 < chunks.size()) chunks[i].next_id = chunks[i + 1].chunk_id;
  }
}

// Generator that records every request and answers with a fixed function.
class RecordingGenerator : public TextGenerator {
 public:
  using Fn = std::function<std::vector<std::string>(const GenerationRequest&)>;
  explicit RecordingGenerator(Fn fn) : fn_(std::move(fn)) {}

  std::vector<std::string> generate_texts(const GenerationRequest& request) override {
    std::lock_guard lock(mu_);
    requests.push_back(request);
    return fn_(request);
  }

  std::vector<GenerationRequest> requests;

 private:
  Fn fn_;
  std::mutex mu_;
};

class FailingGenerator : public TextGenerator {
 public:
  std::vector<std::string> generate_texts(const GenerationRequest&) override {
    throw ClientError("generator offline");
  }
};

class FailingEmbedder : public Embedder {
 public:
  std::vector<Vector> embed_texts(const std::vector<std::string>&) override {
    throw ClientError("embedder offline");
  }
  std::size_t dimension() const override { return 64; }
};

// Cross-encoder returning a fixed logit per passage text.
class TableCrossEncoder : public CrossEncoder {
 public:
  std::map<std::string, double> logits;
  double fallback = 0.0;

  std::vector<double> cross_score(const std::string&, const std::vector<std::string>& passages) override {
    std::vector<double> out;
    for (const auto& p : passages) {
      auto it = logits.find(p);
      out.push_back(it == logits.end() ? fallback : it->second);
    }
    return out;
  }
};

}  // namespace finsage::testing
