#include "finsage/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "finsage/errors.hpp"

namespace finsage {

double time_bonus(const std::optional<Date>& publication_date, const Date& query_time) {
  if (!publication_date) return 0.0;
  const long delta = std::max(0L, query_time.days_since(*publication_date));
  return std::max(0.0, 1.0 - static_cast<double>(delta) / 365.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

ScoredCandidate make_scored(const RerankItem& item, double logit, double beta,
                            const Date& query_time) {
  ScoredCandidate s;
  s.item = item;
  s.raw_logit = logit;
  s.time_bonus = time_bonus(item.publication_date, query_time);
  s.final_score = sigmoid(s.pre_activation(beta));
  return s;
}

}  // namespace

ScoredCandidate score_candidate(const std::string& query, const RerankItem& item,
                                CrossEncoder& scorer, double beta, const Date& query_time) {
  if (item.text.empty()) throw Error(ErrorCode::kArgument, "candidate '" + item.id + "' has no text");
  auto logits = scorer.cross_score(query, {item.text});
  if (logits.size() != 1 || !std::isfinite(logits.front())) {
    throw ClientError("cross-encoder returned an invalid logit for '" + item.id + "'", false);
  }
  return make_scored(item, logits.front(), beta, query_time);
}

RerankResult rerank_top_k(const std::vector<RerankItem>& items, const std::string& query,
                          CrossEncoder& scorer, std::size_t k, double beta,
                          const Date& query_time) {
  if (k < 1) throw Error(ErrorCode::kArgument, "rerank K must be >= 1");
  RerankResult result;
  std::vector<const RerankItem*> scorable;
  for (const auto& item : items) {
    if (item.text.empty()) {
      result.warnings.push_back("candidate '" + item.id + "' has no text; dropped");
    } else {
      scorable.push_back(&item);
    }
  }
  if (scorable.empty()) return result;

  std::vector<std::string> passages;
  passages.reserve(scorable.size());
  for (const auto* item : scorable) passages.push_back(item->text);
  bool batched = false;
  try {
    auto logits = scorer.cross_score(query, passages);
    if (logits.size() == scorable.size() &&
        std::all_of(logits.begin(), logits.end(), [](double x) { return std::isfinite(x); })) {
      for (std::size_t i = 0; i < scorable.size(); ++i) {
        result.ranked.push_back(make_scored(*scorable[i], logits[i], beta, query_time));
      }
      batched = true;
    }
  } catch (const std::exception&) {
  }
  if (!batched) {
    for (const auto* item : scorable) {
      try {
        result.ranked.push_back(score_candidate(query, *item, scorer, beta, query_time));
      } catch (const std::exception& e) {
        result.warnings.push_back("candidate '" + item->id + "' dropped: " + e.what());
      }
    }
  }
  // Ordering by the pre-activation value is equivalent to ordering by the
  // sigmoid output but does not collapse ties where the sigmoid saturates.
  std::sort(result.ranked.begin(), result.ranked.end(),
            [beta](const ScoredCandidate& a, const ScoredCandidate& b) {
              const double za = a.pre_activation(beta);
              const double zb = b.pre_activation(beta);
              if (za != zb) return za > zb;
              return a.item.id < b.item.id;
            });
  if (result.ranked.size() > k) result.ranked.resize(k);
  return result;
}

// ---------------------------------------------------------------------------

void PreferencePair::validate() const {
  if (pos.size() != 1) {
    throw Error(ErrorCode::kInput, "'pos' must hold exactly one passage (got " +
                                       std::to_string(pos.size()) + ")");
  }
  if (neg.empty()) throw Error(ErrorCode::kInput, "'neg' must hold at least one passage");
  if (std::find(neg.begin(), neg.end(), pos.front()) != neg.end()) {
    throw Error(ErrorCode::kInput, "positive passage also appears in 'neg'");
  }
}

nlohmann::ordered_json preference_to_json(const PreferencePair& pair) {
  nlohmann::ordered_json j;
  j["query"] = pair.query;
  j["pos"] = pair.pos;
  j["neg"] = pair.neg;
  if (pair.pos_scores) j["pos_scores"] = *pair.pos_scores;
  if (pair.neg_scores) j["neg_scores"] = *pair.neg_scores;
  if (pair.prompt) j["prompt"] = *pair.prompt;
  return j;
}

PreferencePair preference_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInput, "preference record must be an object");
  PreferencePair p;
  try {
    p.query = j.at("query").get<std::string>();
    p.pos = j.at("pos").get<std::vector<std::string>>();
    p.neg = j.at("neg").get<std::vector<std::string>>();
    if (j.contains("pos_scores")) p.pos_scores = j["pos_scores"].get<std::vector<double>>();
    if (j.contains("neg_scores")) p.neg_scores = j["neg_scores"].get<std::vector<double>>();
    if (j.contains("prompt")) p.prompt = j["prompt"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInput, std::string("malformed preference record: ") + e.what());
  }
  p.validate();
  return p;
}

void write_preference_jsonl(std::ostream& out, const std::vector<PreferencePair>& pairs) {
  for (const auto& p : pairs) out << preference_to_json(p).dump() << '\n';
}

std::vector<PreferencePair> read_preference_jsonl(std::istream& in) {
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(preference_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kInput, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kInput, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

double dpo_term(double k_pos, double k_neg) {
  auto in_range = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_range(k_pos) || !in_range(k_neg)) {
    throw Error(ErrorCode::kDomain, "scores must lie in (0, 1)");
  }
  return -std::log(k_pos / (k_pos + k_neg));
}

double dpo_loss(const std::vector<PreferencePair>& pairs, const PairScorer& scorer) {
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    pair.validate();
    const double k_pos = scorer(pair.query, pair.pos.front());
    for (const auto& neg : pair.neg) {
      const double k_neg = scorer(pair.query, neg);
      try {
        total += dpo_term(k_pos, k_neg);
      } catch (const Error& e) {
        throw Error(ErrorCode::kDomain, "pair " + std::to_string(i) + " (query '" + pair.query +
                                            "'): " + e.what());
      }
      ++terms;
    }
  }
  if (terms == 0) throw Error(ErrorCode::kArgument, "dpo_loss needs at least one pair");
  return total / static_cast<double>(terms);
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform integer in [0, bound) by rejection; std::uniform_int_distribution
// is not specified bit-for-bit across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

PreferenceBuild build_preference_dataset(const std::vector<EvalQuery>& queries,
                                         const std::vector<std::vector<std::string>>& traces,
                                         const ChunkStore& store, double balance_ratio,
                                         std::uint64_t seed) {
  if (!(balance_ratio > 0.0)) throw Error(ErrorCode::kArgument, "balance ratio must be > 0");
  if (traces.size() != queries.size()) {
    throw Error(ErrorCode::kArgument, "one retrieval trace per query is required");
  }
  const std::size_t per_pair = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(balance_ratio)));
  PreferenceBuild out;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    const std::set<std::string> relevant(q.relevant_chunk_ids.begin(), q.relevant_chunk_ids.end());
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
    std::set<std::string> seen;
    for (const auto& id : traces[qi]) {
      if (!seen.insert(id).second) continue;
      (relevant.count(id) ? positives : negatives).push_back(id);
    }
    if (positives.empty()) {
      out.warnings.push_back(q.query_id + ": no annotated relevant chunk in its trace; skipped");
      continue;
    }
    if (negatives.empty()) {
      out.warnings.push_back(q.query_id + ": no retrieved negatives; skipped");
      continue;
    }
    for (std::size_t pi = 0; pi < positives.size(); ++pi) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(qi * 0x100000001ULL + pi)));
      std::vector<std::string> pool = negatives;
      const std::size_t take = std::min(per_pair, pool.size());
      for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      PreferencePair pair;
      pair.query = q.query;
      pair.pos = {store.at(positives[pi]).text};
      for (std::size_t i = 0; i < take; ++i) {
        const auto& text = store.at(pool[i]).text;
        if (text != pair.pos.front()) pair.neg.push_back(text);
      }
      if (pair.neg.empty()) {
        out.warnings.push_back(q.query_id + ": negatives identical to positive; pair skipped");
        continue;
      }
      out.pairs.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace finsage
