#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "finsage/errors.hpp"
#include "finsage/metrics.hpp"

using namespace finsage;

namespace {

// Brute-force reference implementations, written from the definitions
// without sharing code with the library.
struct Oracle {
  static double precision(const IdSet& r, const IdSet& g) {
    if (r.empty()) return 0.0;
    IdSet both;
    std::set_intersection(r.begin(), r.end(), g.begin(), g.end(), std::inserter(both, both.end()));
    return double(both.size()) / double(r.size());
  }
  static double recall(const IdSet& r, const IdSet& g) {
    IdSet both;
    std::set_intersection(r.begin(), r.end(), g.begin(), g.end(), std::inserter(both, both.end()));
    return double(both.size()) / double(g.size());
  }
  static double f1(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }
  static double nrecall(const RankedList& l, const IdSet& g, std::size_t k) {
    IdSet hit;
    for (const auto& x : l)
      if (g.count(x)) hit.insert(x);
    return double(hit.size()) / double(std::min(g.size(), k));
  }
  static double mrr(const RankedList& l, const IdSet& g) {
    for (std::size_t i = 0; i < l.size(); ++i)
      if (g.count(l[i])) return 1.0 / double(i + 1);
    return 0.0;
  }
  static double ndcg(const RankedList& l, const IdSet& g) {
    double dcg = 0, idcg = 0;
    IdSet seen;
    for (std::size_t i = 1; i <= l.size(); ++i) {
      const auto& x = l[i - 1];
      if (g.count(x) && !seen.count(x)) {
        seen.insert(x);
        dcg += std::log(2.0) / std::log(double(i) + 1.0);
      }
    }
    for (std::size_t i = 1; i <= g.size(); ++i) idcg += std::log(2.0) / std::log(double(i) + 1.0);
    return dcg / idcg;
  }
};

}  // namespace

TEST_CASE("set metrics examples") {
  IdSet rel{"a", "b", "c", "d", "e"};
  IdSet ret{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  auto m = set_metrics(ret, rel);
  CHECK(m.recall == 1.0);
  CHECK(m.precision == 0.5);
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.num_retrieved == 10);

  auto none = set_metrics({"x", "y"}, rel);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  auto same = set_metrics(rel, rel);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  auto empty = set_metrics({}, rel);
  CHECK(empty.precision == 0.0);
  CHECK_THROWS_AS(set_metrics(ret, {}), Error);
}

TEST_CASE("normalized recall examples") {
  IdSet eight{"1", "2", "3", "4", "5", "6", "7", "8"};
  CHECK(normalized_recall({"1", "2", "3", "4", "5"}, eight, 5) == 1.0);
  CHECK(normalized_recall({"a", "b", "x", "y", "z"}, {"a", "b", "c"}, 5) == doctest::Approx(2.0 / 3.0));
  CHECK(normalized_recall({"x"}, {"a"}, 5) == 0.0);
  CHECK_THROWS_AS(normalized_recall({}, {"a"}, 0), Error);
  CHECK_THROWS_AS(normalized_recall({"a", "b"}, {"a"}, 1), Error);
}

TEST_CASE("mrr examples") {
  CHECK(mrr({"a", "b"}, {"a"}) == 1.0);
  CHECK(mrr({"x", "y", "a"}, {"a"}) == doctest::Approx(1.0 / 3.0));
  CHECK(mrr({"x", "y"}, {"a"}) == 0.0);
}

TEST_CASE("binary ndcg examples") {
  CHECK(binary_ndcg({"a", "b", "x"}, {"a", "b"}) == doctest::Approx(1.0).epsilon(1e-12));
  const double expected = 1.5 / (1.0 + 1.0 / std::log2(3.0));
  CHECK(binary_ndcg({"a", "x", "b"}, {"a", "b"}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(binary_ndcg({"a", "x", "b"}, {"a", "b"}) - 0.91972) < 1e-6);
  CHECK(binary_ndcg({"x"}, {"a"}) == 0.0);
  CHECK(binary_ndcg({"a", "a"}, {"a", "b"}) == doctest::Approx(1.0 / (1.0 + 1.0 / std::log2(3.0))));
}

TEST_CASE("metrics agree with brute-force oracles on random instances") {
  std::mt19937_64 rng(20240611);
  const std::vector<std::string> universe{"c0", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "c10", "c11"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> pool = universe;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n_rel = 1 + rng() % 5;
    IdSet rel(pool.begin(), pool.begin() + n_rel);
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n_list = rng() % 11;
    RankedList list(pool.begin(), pool.begin() + n_list);
    const std::size_t k = std::max<std::size_t>(1, n_list + rng() % 3);
    IdSet ret(list.begin(), list.end());

    auto m = set_metrics(ret, rel);
    const double p = Oracle::precision(ret, rel), r = Oracle::recall(ret, rel);
    CHECK(std::abs(m.precision - p) <= 1e-9);
    CHECK(std::abs(m.recall - r) <= 1e-9);
    CHECK(std::abs(m.f1 - Oracle::f1(p, r)) <= 1e-9);
    CHECK(std::abs(normalized_recall(list, rel, k) - Oracle::nrecall(list, rel, k)) <= 1e-9);
    CHECK(std::abs(mrr(list, rel) - Oracle::mrr(list, rel)) <= 1e-9);
    CHECK(std::abs(binary_ndcg(list, rel) - Oracle::ndcg(list, rel)) <= 1e-9);
  }
}

TEST_CASE("ndcg never exceeds the ideal ordering") {
  std::mt19937 rng(3);
  RankedList list{"a", "b", "c", "d", "e"};
  IdSet rel{"a", "c", "e"};
  RankedList ideal{"a", "c", "e", "b", "d"};
  CHECK(binary_ndcg(ideal, rel) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 200; ++i) {
    std::shuffle(list.begin(), list.end(), rng);
    CHECK(binary_ndcg(list, rel) <= 1.0 + 1e-12);
  }
}

TEST_CASE("normalized recall bounds plain top-K recall") {
  std::mt19937 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n_rel = 1 + rng() % 8;
    IdSet rel;
    for (std::size_t j = 0; j < n_rel; ++j) rel.insert("r" + std::to_string(j));
    const std::size_t k = 1 + rng() % 6;
    RankedList top;
    for (std::size_t j = 0; j < k; ++j) top.push_back(rng() % 2 ? "r" + std::to_string(rng() % 10) : "n" + std::to_string(j));
    std::sort(top.begin(), top.end());
    top.erase(std::unique(top.begin(), top.end()), top.end());
    const double plain = set_metrics(IdSet(top.begin(), top.end()), rel).recall;
    const double norm = normalized_recall(top, rel, k);
    CHECK(norm >= plain - 1e-12);
    if (rel.size() <= k) CHECK(norm == doctest::Approx(plain));
    if (plain > 0 && rel.size() > k) CHECK(norm > plain);
  }
}

TEST_CASE("overlap partition") {
  std::vector<PathRelevantSets> q(1);
  q[0][RetrievalPath::kDense] = {"x"};
  q[0][RetrievalPath::kHyde] = {"x"};
  auto cells = overlap_partition(q);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].paths == 0b1001);
  CHECK(cells[0].percentage == 100.0);

  // Random traces against enumeration over all 15 path subsets.
  std::mt19937 rng(11);
  std::vector<PathRelevantSets> traces(20);
  for (auto& t : traces) {
    for (auto p : kAllPaths) {
      for (int c = 0; c < 6; ++c)
        if (rng() % 2) t[p].insert("c" + std::to_string(c));
    }
  }
  auto got = overlap_partition(traces);
  double total_pct = 0.0;
  std::size_t total = 0;
  std::map<int, std::size_t> brute;
  for (auto& t : traces) {
    for (int c = 0; c < 6; ++c) {
      const std::string id = "c" + std::to_string(c);
      int mask = 0;
      for (auto p : kAllPaths)
        if (t.count(p) && t.at(p).count(id)) mask |= 1 << int(p);
      if (mask) {
        ++brute[mask];
        ++total;
      }
    }
  }
  REQUIRE(got.size() == brute.size());
  for (const auto& cell : got) {
    CHECK(cell.count == brute[cell.paths]);
    CHECK(cell.percentage == doctest::Approx(100.0 * double(brute[cell.paths]) / double(total)));
    total_pct += cell.percentage;
  }
  CHECK(std::abs(total_pct - 100.0) < 1e-9);
  CHECK(overlap_partition({}).empty());
}
