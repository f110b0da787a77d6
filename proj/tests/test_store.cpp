#include <cmath>
#include <random>

#include "doctest.h"
#include "finsage/store.hpp"
#include "helpers.hpp"

using namespace finsage;
using namespace finsage::testing;

namespace {

Vector axis(std::size_t i, std::size_t dim = 4) {
  Vector v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

// Okapi BM25 written out term by term for the oracle comparison.
double oracle_bm25(const std::vector<std::string>& docs, std::size_t d, const std::vector<std::string>& query,
                   double k1 = 1.5, double b = 0.75) {
  std::vector<std::map<std::string, int>> tf;
  double total_len = 0;
  for (const auto& text : docs) {
    tf.push_back(term_frequencies(text));
    for (const auto& [_, c] : tf.back()) total_len += c;
  }
  const double avg = total_len / double(docs.size());
  double len = 0;
  for (const auto& [_, c] : tf[d]) len += c;
  double score = 0;
  for (const auto& q : query) {
    double n = 0;
    for (const auto& m : tf) n += m.count(q) ? 1 : 0;
    const double idf = std::log((double(docs.size()) - n + 0.5) / (n + 0.5) + 1.0);
    const double f = tf[d].count(q) ? tf[d].at(q) : 0;
    score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len / avg));
  }
  return score;
}

}  // namespace

TEST_CASE("bm25 scores match a direct evaluation of the formula") {
  const std::vector<std::string> docs{"cash and cash equivalents rose", "the revolving credit facility was undrawn",
                                      "cash flow from operations", "green bonds due 2034 repaid the term loan",
                                      "wind output fell and cash declined"};
  ChunkStore store;
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < docs.size(); ++i) chunks.push_back(make_chunk(docs[i], "d", "s", axis(i % 4)));
  store.upsert_chunks(chunks);
  for (const std::vector<std::string>& q : {std::vector<std::string>{"cash"}, {"cash", "flow"}, {"bonds", "loan", "cash"},
                                            {"cash", "cash"}}) {
    auto hits = store.bm25_search(q, 10);
    for (const auto& h : hits) {
      std::size_t d = 0;
      while (chunks[d].chunk_id != h.chunk_id) ++d;
      CHECK(h.score == doctest::Approx(oracle_bm25(docs, d, q)).epsilon(1e-12));
      CHECK(h.path == RetrievalPath::kBm25);
    }
    for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score >= hits[i].score);
  }
  CHECK(store.bm25_search({"nothing"}, 5).empty());
  CHECK(store.idf("cash") == doctest::Approx(std::log((5 - 3 + 0.5) / 3.5 + 1)));
}

TEST_CASE("dense search is exhaustive cosine with id tie-break") {
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  ChunkStore store;
  std::vector<Chunk> chunks;
  for (int i = 0; i < 30; ++i) {
    Vector v(8);
    for (auto& x : v) x = g(rng);
    chunks.push_back(make_chunk("chunk " + std::to_string(i), "d", "s", unit(v)));
  }
  chunks.push_back(make_chunk("twin a", "d", "s", chunks[0].dense));
  store.upsert_chunks(chunks);
  Vector q = chunks[0].dense;
  auto hits = store.dense_search(q, 5);
  REQUIRE(hits.size() == 5);
  std::vector<std::string> top{chunks[0].chunk_id, chunks.back().chunk_id};
  std::sort(top.begin(), top.end());
  CHECK(hits[0].chunk_id == top[0]);
  CHECK(hits[1].chunk_id == top[1]);
  CHECK(hits[0].rank == 1);
  CHECK(hits[4].rank == 5);
  std::vector<double> all;
  for (const auto& c : chunks) all.push_back(dot(q, c.dense));
  std::sort(all.rbegin(), all.rend());
  for (int i = 0; i < 5; ++i) CHECK(hits[i].score == doctest::Approx(all[i]));
  CHECK_THROWS_AS(store.dense_search(Vector(8, 1.0), 5), Error);
  CHECK_THROWS_AS(store.dense_search(q, 0), Error);
  CHECK_THROWS_AS(store.dense_search(unit({1, 0}), 5), DimensionError);
}

TEST_CASE("metadata search expands the best segments to all of their chunks") {
  std::vector<Chunk> chunks{make_chunk("a1", "d", "seg-a", axis(0), {}, axis(1)),
                            make_chunk("b1", "d", "seg-b", axis(0), {}, axis(2)),
                            make_chunk("a2", "d", "seg-a", axis(0), {}, axis(1)),
                            make_chunk("c1", "d", "seg-c", axis(0), {}, unit({0, 1, 1, 0}))};
  ChunkStore store;
  store.upsert_chunks(chunks);
  auto hits = store.metadata_search(axis(1), 2);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].chunk_id == sha256_hex("a1"));
  CHECK(hits[1].chunk_id == sha256_hex("a2"));
  CHECK(hits[2].chunk_id == sha256_hex("c1"));
  CHECK(hits[0].score == hits[1].score);
  CHECK(hits[2].rank == 3);
  CHECK(store.metadata_search(axis(3), 10).size() == 4);
}

TEST_CASE("upsert keeps the newest publication date") {
  ChunkStore store;
  auto old_version = make_chunk("same text", "d", "s", axis(0), Date(2023, 1, 1));
  auto new_version = make_chunk("same text", "d2", "s", axis(0), Date(2024, 1, 1));
  auto report = store.upsert_chunks({old_version});
  CHECK(report.inserted == 1);
  report = store.upsert_chunks({new_version});
  CHECK(report.replaced == 1);
  CHECK(store.at(new_version.chunk_id).meta.publication_date == Date(2024, 1, 1));
  report = store.upsert_chunks({old_version});
  CHECK(report.skipped == 1);
  report = store.upsert_chunks({new_version});
  CHECK(report.skipped == 1);
  CHECK(store.at(new_version.chunk_id).meta.document_id == "d2");
  CHECK(store.size() == 1);

  auto undated = make_chunk("undated", "d", "s", axis(1));
  auto dated = make_chunk("undated", "d", "s", axis(1), Date(2020, 1, 1));
  store.upsert_chunks({undated});
  CHECK(store.upsert_chunks({dated}).replaced == 1);
  CHECK(store.upsert_chunks({undated}).skipped == 1);
}

TEST_CASE("a batch with a wrong dimension is rejected whole") {
  ChunkStore store;
  store.upsert_chunks({make_chunk("x", "d", "s", axis(0))});
  CHECK_THROWS_AS(store.upsert_chunks({make_chunk("y", "d", "s", axis(1)), make_chunk("z", "d", "s", axis(0, 5))}),
                  DimensionError);
  CHECK(store.size() == 1);
}

TEST_CASE("neighbour lookups follow the links") {
  std::vector<Chunk> chain{make_chunk("one", "d", "s", axis(0)), make_chunk("two", "d", "s", axis(1)),
                           make_chunk("three", "d", "s", axis(2))};
  link_chain(chain);
  ChunkStore store;
  store.upsert_chunks(chain);
  CHECK(store.get_neighbors(chain[1].chunk_id, Direction::kPrev)->text == "one");
  CHECK(store.get_neighbors(chain[1].chunk_id, Direction::kNext)->text == "three");
  CHECK(store.get_neighbors(chain[0].chunk_id, Direction::kPrev) == nullptr);
  CHECK(store.get_neighbors(chain[2].chunk_id, Direction::kNext) == nullptr);
  CHECK_THROWS_AS(store.get_neighbors("missing", Direction::kNext), Error);
  CHECK(store.segment_chunks("s").size() == 3);
}

TEST_CASE("save and load round-trip byte for byte") {
  TempDir dir;
  std::vector<Chunk> chunks{make_chunk("alpha text", "d", "s1", axis(0), Date(2024, 5, 1)),
                            make_chunk("beta text", "d", "s2", axis(1))};
  link_chain(chunks);
  ChunkStore store({1.2, 0.5});
  store.upsert_chunks(chunks);
  store.save(dir.file("a.jsonl"));
  auto loaded = ChunkStore::load(dir.file("a.jsonl"));
  loaded.save(dir.file("b.jsonl"));
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  CHECK(loaded.size() == 2);
  CHECK(loaded.bm25_params().k1 == 1.2);
  CHECK(loaded.bm25_search({"alpha"}, 1) == store.bm25_search({"alpha"}, 1));
  CHECK(loaded.at(chunks[0].chunk_id).next_id == chunks[1].chunk_id);
  auto manifest = manifest_to_json(loaded.manifest());
  CHECK(manifest["chunk_count"] == 2);
  CHECK(manifest["embedding_dim"] == 4);
}

TEST_CASE("loading rejects malformed stores") {
  TempDir dir;
  auto code_of = [&](const std::string& content) {
    spit(dir.file("s.jsonl"), content);
    try {
      ChunkStore::load(dir.file("s.jsonl"));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInput;
  };
  CHECK(code_of("") == ErrorCode::kFormat);
  CHECK(code_of("{\"format\":\"other\"}\n") == ErrorCode::kFormat);
  CHECK(code_of("not json\n") == ErrorCode::kFormat);
  ChunkStore store;
  store.upsert_chunks({make_chunk("x", "d", "s", axis(0))});
  store.save(dir.file("good.jsonl"));
  auto text = slurp(dir.file("good.jsonl"));
  auto first_nl = text.find('\n');
  CHECK(code_of(text.substr(0, first_nl + 1)) == ErrorCode::kFormat);  // chunk line missing
  CHECK_THROWS_AS(ChunkStore::load(dir.file("missing.jsonl")), Error);
}

TEST_CASE("an empty store answers searches with nothing") {
  ChunkStore store;
  CHECK(store.empty());
  CHECK(store.bm25_search({"x"}, 3).empty());
}
