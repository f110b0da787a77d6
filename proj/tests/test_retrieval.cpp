#include <algorithm>
#include <random>

#include "doctest.h"
#include "finsage/retrieval.hpp"
#include "helpers.hpp"

using namespace finsage;
using namespace finsage::testing;

namespace {

ChunkStore corpus_store(const std::vector<std::string>& texts) {
  StubEmbedder emb;
  auto vecs = emb.embed_texts(texts);
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < texts.size(); ++i) chunks.push_back(make_chunk(texts[i], "d", "s" + std::to_string(i % 3), vecs[i]));
  link_chain(chunks);
  ChunkStore store;
  store.upsert_chunks(chunks);
  return store;
}

const std::vector<std::string> kTexts{
    "Net sales for fiscal 2024 were 1.84 billion",       "Gross margin expanded to 47.5 percent",
    "Cash and equivalents totaled 612 million",          "The revolving credit facility remained undrawn",
    "Green bonds due 2034 repaid a term loan",           "Unrealized losses on electricity swaps",
    "Carbon intensity fell to 18 grams per kilowatt hour", "Lost time injury frequency was 0.9"};

SearchHit hit(const std::string& id, RetrievalPath path, int rank) { return {id, 1.0 / rank, path, rank}; }

}  // namespace

TEST_CASE("paraphrase splits compound questions") {
  StubGenerator stub;
  auto plan = paraphrase_query("What was revenue? How did margins move and what drove cash flow?", {}, stub);
  CHECK(plan.sub_queries ==
        std::vector<std::string>{"What was revenue?", "How did margins move", "what drove cash flow?"});
  CHECK_FALSE(plan.degraded);

  FailingGenerator broken;
  auto fallback = paraphrase_query("What was revenue?", {"earlier turn"}, broken);
  CHECK(fallback.sub_queries == std::vector<std::string>{"What was revenue?"});
  CHECK(fallback.degraded);
  CHECK(fallback.history_used);
  CHECK_THROWS_AS(paraphrase_query("   ", {}, stub), Error);

  RecordingGenerator rec([](const GenerationRequest&) { return std::vector<std::string>{"a\n\n b \n"}; });
  CHECK(paraphrase_query("q", {"h1", "h2"}, rec).sub_queries == std::vector<std::string>{"a", "b"});
  CHECK(rec.requests[0].context == std::vector<std::string>{"h1", "h2"});
}

TEST_CASE("HyDE with an identity generator equals dense search") {
  auto store = corpus_store(kTexts);
  StubGenerator stub;
  StubEmbedder emb;
  for (const std::string q : {"cash and equivalents", "green bonds", "injury frequency", "margin"}) {
    for (std::size_t n : {1u, 3u}) {
      auto hyde = retrieve_hyde(q, n, stub, emb, store, 5);
      auto qv = emb.embed_texts({q})[0];
      normalize(qv);
      auto dense = store.dense_search(qv, 5);
      REQUIRE(hyde.size() == dense.size());
      for (std::size_t i = 0; i < hyde.size(); ++i) {
        CHECK(hyde[i].chunk_id == dense[i].chunk_id);
        CHECK(hyde[i].score == dense[i].score);
        CHECK(hyde[i].rank == dense[i].rank);
        CHECK(hyde[i].path == RetrievalPath::kHyde);
      }
    }
  }
}

TEST_CASE("HyDE merges distinct hypotheses by max score") {
  auto store = corpus_store(kTexts);
  RecordingGenerator two([](const GenerationRequest&) {
    return std::vector<std::string>{"Cash and equivalents totaled 612 million", "Lost time injury frequency was 0.9"};
  });
  StubEmbedder emb;
  auto hits = retrieve_hyde("safety and cash", 2, two, emb, store, 2);
  REQUIRE(hits.size() == 2);
  std::vector<std::string> ids{hits[0].chunk_id, hits[1].chunk_id};
  CHECK(std::count(ids.begin(), ids.end(), sha256_hex(kTexts[2])) == 1);
  CHECK(std::count(ids.begin(), ids.end(), sha256_hex(kTexts[7])) == 1);
  CHECK(hits[0].score == doctest::Approx(1.0));

  FailingGenerator broken;
  auto fallback = retrieve_hyde("green bonds", 3, broken, emb, store, 3);
  auto direct = retrieve_hyde("green bonds", 1, *std::make_shared<StubGenerator>(), emb, store, 3);
  CHECK(fallback == direct);
}

TEST_CASE("retrieve_paths runs every enabled path") {
  auto store = corpus_store(kTexts);
  auto clients = ModelClients::stubs();
  RetrievalConfig config;
  auto set = retrieve_paths("green bonds term loan", store, clients, config);
  CHECK(set.errors.empty());
  CHECK(set.path_hits(RetrievalPath::kDense).size() == 8);
  CHECK(set.path_hits(RetrievalPath::kBm25).size() == 1);
  CHECK_FALSE(set.path_hits(RetrievalPath::kMetadata).empty());
  CHECK(set.path_hits(RetrievalPath::kHyde).size() == 8);

  config.k_bm25 = 0;
  config.k_hyde = 0;
  auto partial = retrieve_paths("green bonds", store, clients, config);
  CHECK(partial.path_hits(RetrievalPath::kBm25).empty());
  CHECK(partial.path_hits(RetrievalPath::kHyde).empty());

  RetrievalConfig none{0, 0, 0, 0, 3};
  CHECK_THROWS_AS(retrieve_paths("x", store, clients, none), Error);
  ChunkStore empty;
  try {
    retrieve_paths("x", empty, clients, {});
    FAIL("expected empty-store");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyStore);
  }
}

TEST_CASE("a failing embedder leaves the lexical path working") {
  auto store = corpus_store(kTexts);
  auto clients = ModelClients::stubs();
  clients.embedder = std::make_shared<FailingEmbedder>();
  auto set = retrieve_paths("green bonds", store, clients, {});
  CHECK(set.errors.size() == 3);
  CHECK(set.path_hits(RetrievalPath::kBm25).size() == 1);

  RetrievalConfig dense_only{10, 0, 0, 0, 3};
  try {
    retrieve_paths("green bonds", store, clients, dense_only);
    FAIL("expected a client error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kClient);
  }
}

TEST_CASE("union merges paths and orders by best rank") {
  auto u = union_candidates({hit("x", RetrievalPath::kDense, 1), hit("x", RetrievalPath::kBm25, 3),
                             hit("y", RetrievalPath::kBm25, 1), hit("z", RetrievalPath::kHyde, 1),
                             hit("w", RetrievalPath::kMetadata, 2)});
  REQUIRE(u.size() == 4);
  CHECK(u[0].chunk_id == "x");
  CHECK(u[0].has_path(RetrievalPath::kDense));
  CHECK(u[0].has_path(RetrievalPath::kBm25));
  CHECK(u[0].best_rank == 1);
  CHECK(u[1].chunk_id == "y");
  CHECK(u[2].chunk_id == "z");
  CHECK(u[3].chunk_id == "w");
  CHECK(path_names(u[0].paths) == std::vector<std::string>{"dense", "bm25"});

  std::vector<SearchHit> disjoint;
  for (auto p : kAllPaths)
    for (int r = 1; r <= 5; ++r) disjoint.push_back(hit(std::string(path_name(p)) + std::to_string(r), p, r));
  CHECK(union_candidates(disjoint).size() == 20);
}

TEST_CASE("union order does not depend on hit arrival order") {
  std::mt19937 rng(9);
  std::vector<SearchHit> hits;
  for (auto p : kAllPaths)
    for (int r = 1; r <= 6; ++r) hits.push_back(hit("c" + std::to_string(rng() % 10), p, r));
  auto reference = union_candidates(hits);
  CHECK(reference.size() <= hits.size());
  for (int i = 0; i < 20; ++i) {
    std::shuffle(hits.begin(), hits.end(), rng);
    auto again = union_candidates(hits);
    REQUIRE(again.size() == reference.size());
    for (std::size_t j = 0; j < again.size(); ++j) {
      CHECK(again[j].chunk_id == reference[j].chunk_id);
      CHECK(again[j].paths == reference[j].paths);
      CHECK(again[j].best_path == reference[j].best_path);
    }
  }
}

TEST_CASE("bundles grow to the limit on an identical chain") {
  std::vector<Chunk> chain;
  for (int i = 0; i < 7; ++i) chain.push_back(make_chunk("link " + std::to_string(i), "d", "s", unit({1, 0, 0})));
  link_chain(chain);
  ChunkStore store;
  store.upsert_chunks(chain);
  for (int seed = 0; seed < 7; ++seed) {
    Candidate c{chain[seed].chunk_id, 1, 1, RetrievalPath::kDense};
    auto bundles = expand_bundles({c}, store, 0.85, 5);
    REQUIRE(bundles.size() == 1);
    const auto& m = bundles[0].member_ids;
    REQUIRE(m.size() == 5);
    // Contiguous run in document order that contains the seed.
    auto first = std::find_if(chain.begin(), chain.end(), [&](const Chunk& x) { return x.chunk_id == m[0]; }) - chain.begin();
    for (std::size_t j = 0; j < 5; ++j) CHECK(m[j] == chain[first + j].chunk_id);
    CHECK(std::find(m.begin(), m.end(), chain[seed].chunk_id) != m.end());
    CHECK(bundles[0].combined_text.find('\n') != std::string::npos);
  }
  Candidate mid{chain[3].chunk_id, 1, 1, RetrievalPath::kDense};
  auto b = expand_bundles({mid}, store, 0.85, 5)[0];
  CHECK(b.member_ids == std::vector<std::string>{chain[1].chunk_id, chain[2].chunk_id, chain[3].chunk_id,
                                                 chain[4].chunk_id, chain[5].chunk_id});
  CHECK(b.combined_text == "link 1\nlink 2\nlink 3\nlink 4\nlink 5");
}

TEST_CASE("a failed direction closes and isolated seeds stay single") {
  std::vector<Chunk> chain{make_chunk("p2", "d", "s", unit({1, 0})), make_chunk("p1", "d", "s", unit({0, 1})),
                           make_chunk("seed", "d", "s", unit({1, 0})), make_chunk("n1", "d", "s", unit({1, 0.1})),
                           make_chunk("n2", "d", "s", unit({1, 0.2}))};
  link_chain(chain);
  ChunkStore store;
  store.upsert_chunks(chain);
  auto b = expand_bundles({{chain[2].chunk_id, 1, 1, RetrievalPath::kDense}}, store, 0.85, 5)[0];
  // p1 fails, so p2 is never reached even though it matches the seed.
  CHECK(b.member_ids == std::vector<std::string>{chain[2].chunk_id, chain[3].chunk_id, chain[4].chunk_id});

  ChunkStore lone;
  lone.upsert_chunks({make_chunk("alone", "d", "s", unit({1, 0}))});
  auto single = expand_bundles({{sha256_hex("alone"), 1, 1, RetrievalPath::kDense}}, lone, 0.85, 5)[0];
  CHECK(single.member_ids.size() == 1);
  CHECK(single.combined_text == "alone");
  CHECK(expand_bundles({{chain[2].chunk_id, 1, 1, RetrievalPath::kDense}}, store, 0.85, 1)[0].member_ids.size() == 1);
  CHECK_THROWS_AS(expand_bundles({}, store, 0.0, 5), Error);
  CHECK_THROWS_AS(expand_bundles({}, store, 0.85, 0), Error);
}

TEST_CASE("trace json lists every path") {
  auto store = corpus_store(kTexts);
  auto set = retrieve_paths("cash", store, ModelClients::stubs(), {});
  auto j = retrieved_set_to_json(set);
  CHECK(j["sub_query"] == "cash");
  CHECK(j["paths"].size() == 4);
  CHECK(j["paths"]["bm25"][0]["rank"] == 1);
}
