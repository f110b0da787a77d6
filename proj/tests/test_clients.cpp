#include <atomic>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "finsage/clients.hpp"
#include "helpers.hpp"
#include "httplib.h"

using namespace finsage;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(httplib::Server&)> routes) {
    routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ClientConfig http_config(const std::string& endpoint, int concurrency = 4, int attempts = 3) {
  ClientConfig c;
  c.kind = ClientKind::kHttp;
  c.endpoint = endpoint;
  c.max_concurrency = concurrency;
  c.retry.attempts = attempts;
  c.retry.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(5000);
  return c;
}

void reply(httplib::Response& res, const nlohmann::json& body) { res.set_content(body.dump(), "application/json"); }

}  // namespace

TEST_CASE("stub embedder is deterministic and unit norm") {
  StubEmbedder emb;
  auto a = emb.embed_texts({"Cash and equivalents", "cash AND equivalents", "wind farm"});
  CHECK(a[0] == a[1]);
  CHECK(a[0].size() == 64);
  CHECK(l2_norm(a[2]) == doctest::Approx(1.0));
  CHECK(StubEmbedder::grams_of("Ab") == std::vector<std::string>{" ab", "ab "});
  CHECK(StubEmbedder::grams_of("") == std::vector<std::string>{"  "});
  // FNV-1a of the empty string is the offset basis.
  CHECK(StubEmbedder::bucket_of("") == 0xcbf29ce484222325ULL % 64);
  CHECK(emb.embed_texts({"x"}) == emb.embed_texts({"x"}));
}

TEST_CASE("stub generator roles") {
  StubGenerator gen;
  GenerationRequest r;
  r.role = GenerationRole::kSummarize;
  r.input = "one two three four five six seven eight nine ten eleven twelve";
  CHECK(gen.generate_texts(r)[0] == "one two three four five six seven eight nine ten");
  r.role = GenerationRole::kHyde;
  r.input = "q";
  r.n = 3;
  CHECK(gen.generate_texts(r) == std::vector<std::string>{"q", "q", "q"});
  r.role = GenerationRole::kCoref;
  r.input = "It rose.";
  CHECK(gen.generate_texts(r)[0] == "It rose.");
  CHECK(StubGenerator::split_query("Revenue? Cash and debt") ==
        std::vector<std::string>{"Revenue?", "Cash", "debt"});
  CHECK(StubGenerator::split_query("Revenue and costs (sales and marketing)") ==
        std::vector<std::string>{"Revenue", "costs (sales and marketing)"});
  CHECK(parse_role("hyde") == GenerationRole::kHyde);
  CHECK(std::string(role_name(GenerationRole::kTextualize)) == "textualize");
}

TEST_CASE("stub cross-encoder is the logit of token jaccard") {
  StubCrossEncoder ce;
  auto l = ce.cross_score("green bonds", {"green bonds", "green bonds due", "wind"});
  CHECK(l[0] == doctest::Approx(std::log((1 - 1e-6) / 1e-6)));
  CHECK(l[1] == doctest::Approx(std::log(2.0)));
  CHECK(l[2] == doctest::Approx(std::log(1e-6 / (1 - 1e-6))));
  CHECK(StubCrossEncoder::jaccard("", "") == 0.0);
}

TEST_CASE("http embedder, generator and cross-encoder speak the protocol") {
  FakeServer server([](httplib::Server& s) {
    s.Post("/v1/embed", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json vectors = nlohmann::json::array();
      for (std::size_t i = 0; i < body["texts"].size(); ++i) vectors.push_back({3.0, 4.0});
      reply(res, {{"vectors", vectors}});
    });
    s.Post("/v1/generate", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      reply(res, {{"texts", {body["role"].get<std::string>() + ":" + std::to_string(body["n"].get<int>())}}});
    });
    s.Post("/v1/score", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json logits = nlohmann::json::array();
      for (const auto& p : body["passages"]) logits.push_back(double(p.get<std::string>().size()));
      reply(res, {{"logits", logits}});
    });
  });
  const auto cfg = http_config(server.endpoint() + "/v1/");
  HttpEmbedder emb(cfg);
  auto v = emb.embed_texts({"a", "b"});
  REQUIRE(v.size() == 2);
  CHECK(v[0][0] == doctest::Approx(0.6));
  CHECK(emb.dimension() == 2);
  HttpGenerator gen(cfg);
  GenerationRequest r;
  r.role = GenerationRole::kParaphrase;
  r.n = 2;
  CHECK(gen.generate_texts(r)[0] == "paraphrase:2");
  HttpCrossEncoder ce(cfg);
  CHECK(ce.cross_score("q", {"ab", "abcd"}) == std::vector<double>{2.0, 4.0});
}

TEST_CASE("http schema violations are non-retryable client errors") {
  std::atomic<int> calls{0};
  FakeServer server([&](httplib::Server& s) {
    s.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      reply(res, {{"vectors", {{1.0, 0.0}, {1.0, 0.0, 0.0}}}});
    });
    s.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      reply(res, {{"scores", {1.0}}});
    });
    s.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.set_content("not json", "application/json");
    });
  });
  const auto cfg = http_config(server.endpoint());
  HttpEmbedder emb(cfg);
  try {
    emb.embed_texts({"a", "b"});
    FAIL("expected a schema error");
  } catch (const ClientError& e) {
    CHECK_FALSE(e.retryable());
    CHECK(std::string(e.what()).find("dimension") != std::string::npos);
  }
  HttpCrossEncoder ce(cfg);
  CHECK_THROWS_AS(ce.cross_score("q", {"p"}), ClientError);
  HttpGenerator gen(cfg);
  CHECK_THROWS_AS(gen.generate_texts({}), ClientError);
  CHECK(calls == 3);
}

TEST_CASE("5xx responses are retried and 4xx are not") {
  std::atomic<int> score_calls{0}, embed_calls{0};
  FakeServer server([&](httplib::Server& s) {
    s.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      if (++score_calls < 3) {
        res.status = 503;
        return;
      }
      reply(res, {{"logits", {0.5}}});
    });
    s.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
      ++embed_calls;
      res.status = 400;
    });
  });
  HttpCrossEncoder ce(http_config(server.endpoint(), 4, 3));
  CHECK(ce.cross_score("q", {"p"}) == std::vector<double>{0.5});
  CHECK(score_calls == 3);
  HttpEmbedder emb(http_config(server.endpoint(), 4, 3));
  CHECK_THROWS_AS(emb.embed_texts({"x"}), ClientError);
  CHECK(embed_calls == 1);

  score_calls = -10;
  HttpCrossEncoder impatient(http_config(server.endpoint(), 4, 2));
  try {
    impatient.cross_score("q", {"p"});
    FAIL("expected exhaustion");
  } catch (const ClientError& e) {
    CHECK(e.retryable());
  }
}

TEST_CASE("unreachable endpoints fail after the retry budget") {
  HttpGenerator gen(http_config("http://127.0.0.1:1", 1, 2));
  CHECK_THROWS_AS(gen.generate_texts({}), ClientError);
}

TEST_CASE("in-flight requests never exceed max_concurrency") {
  std::atomic<int> in_flight{0}, peak{0};
  FakeServer server([&](httplib::Server& s) {
    s.new_task_queue = [] { return new httplib::ThreadPool(16); };
    s.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      const int now = ++in_flight;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      --in_flight;
      reply(res, {{"logits", {1.0}}});
    });
  });
  HttpCrossEncoder ce(http_config(server.endpoint(), 2));
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { ce.cross_score("q", {"p"}); });
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}

TEST_CASE("client config validation and json round-trip") {
  ClientConfig c = http_config("http://localhost:9000/api");
  CHECK_NOTHROW(c.validate("embedder"));
  auto back = client_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(back.endpoint == c.endpoint);
  CHECK(back.max_concurrency == c.max_concurrency);
  CHECK(back.retry.attempts == c.retry.attempts);
  ClientConfig bad = c;
  bad.endpoint = "";
  CHECK_THROWS_AS(bad.validate("embedder"), Error);
  bad = c;
  bad.max_concurrency = 0;
  CHECK_THROWS_AS(bad.validate("embedder"), Error);
  bad = c;
  bad.endpoint = "ftp://x";
  CHECK_THROWS_AS(bad.validate("embedder"), Error);
  CHECK_NOTHROW(ClientConfig{}.validate("stub"));
  CHECK(dynamic_cast<StubEmbedder*>(make_embedder(ClientConfig{}).get()) != nullptr);
  CHECK(dynamic_cast<HttpCrossEncoder*>(make_cross_encoder(c).get()) != nullptr);
  Vector zero(3, 0.0);
  CHECK_THROWS_AS(normalize(zero), Error);
}

TEST_CASE("prompts mention the role and context") {
  GenerationRequest r;
  r.role = GenerationRole::kCoref;
  r.input = "It rose.";
  r.context = {"Northwind sales fell."};
  auto prompt = render_prompt(r);
  CHECK(prompt.find("It rose.") != std::string::npos);
  CHECK(prompt.find("Northwind sales fell.") != std::string::npos);
}
